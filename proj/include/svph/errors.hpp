#pragma once

#include <stdexcept>
#include <string>

namespace svph {

/// Base class of every recoverable numerical failure raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define SVPH_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

SVPH_DEFINE_ERROR(DegenerateDirection);
SVPH_DEFINE_ERROR(NewtonDivergence);
SVPH_DEFINE_ERROR(NotSameFiber);
SVPH_DEFINE_ERROR(ViolatedBound);
SVPH_DEFINE_ERROR(EmptyConeInterval);
SVPH_DEFINE_ERROR(NotReached);
SVPH_DEFINE_ERROR(DepthTooLarge);
SVPH_DEFINE_ERROR(NoConvergence);
SVPH_DEFINE_ERROR(SolverStall);
SVPH_DEFINE_ERROR(QuadratureUnderResolved);
SVPH_DEFINE_ERROR(DegenerateZero);
SVPH_DEFINE_ERROR(ConfigError);

#undef SVPH_DEFINE_ERROR

}  // namespace svph
