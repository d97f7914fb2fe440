#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "svph/errors.hpp"
#include "svph/map.hpp"

namespace svph {

/// Cell-centred samples on an nx x nt torus grid; entry (i, j) sits at
/// ((i + 1/2)/nx, (j + 1/2)/nt) and is stored at index j*nx + i. A fiber
/// function uses nt = 1.
struct GridFunction {
  std::size_t nx = 0, nt = 1;
  std::vector<double> values;

  GridFunction() = default;
  GridFunction(std::size_t nx_, std::size_t nt_, double fill = 0.0) : nx(nx_), nt(nt_), values(nx_ * nt_, fill) {}

  template <typename F>
  static GridFunction sample(std::size_t nx, std::size_t nt, F&& f) {
    GridFunction g(nx, nt);
    for (std::size_t j = 0; j < nt; ++j)
      for (std::size_t i = 0; i < nx; ++i) g.at(i, j) = f(g.x(i), g.theta(j));
    return g;
  }

  std::size_t size() const { return values.size(); }
  double x(std::size_t i) const { return (i + 0.5) / nx; }
  double theta(std::size_t j) const { return (j + 0.5) / nt; }
  double& at(std::size_t i, std::size_t j) { return values[j * nx + i]; }
  double at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }
  double cell_area() const { return 1.0 / static_cast<double>(nx * nt); }

  double integral() const { return std::accumulate(values.begin(), values.end(), 0.0) * cell_area(); }
  double l1() const {
    double s = 0.0;
    for (double v : values) s += std::abs(v);
    return s * cell_area();
  }
  double l2() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s * cell_area());
  }
  double sup() const {
    double s = 0.0;
    for (double v : values) s = std::max(s, std::abs(v));
    return s;
  }
  double min() const { return *std::min_element(values.begin(), values.end()); }

  /// Rescales so that the midpoint-rule integral equals one.
  void normalize() {
    const double m = integral();
    if (!(m != 0.0)) throw ConfigError("cannot normalize a function with zero integral");
    for (double& v : values) v /= m;
  }

  /// Marginal over x: beta(theta_j) = int g(x, theta_j) dx.
  std::vector<double> theta_marginal() const {
    std::vector<double> b(nt, 0.0);
    for (std::size_t j = 0; j < nt; ++j)
      for (std::size_t i = 0; i < nx; ++i) b[j] += at(i, j) / nx;
    return b;
  }
};

inline double l1_distance(const GridFunction& a, const GridFunction& b) {
  if (a.nx != b.nx || a.nt != b.nt) throw ConfigError("l1_distance: grid mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a.values[k] - b.values[k]);
  return s * a.cell_area();
}

}  // namespace svph
