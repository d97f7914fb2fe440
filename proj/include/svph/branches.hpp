#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "svph/errors.hpp"
#include "svph/map.hpp"

namespace svph {

/// Word in {0, ..., d-1}^n; entry k is the digit chosen at backward step k+1.
struct BranchId {
  std::vector<int> word;

  std::size_t depth() const { return word.size(); }
  BranchId then(const BranchId& next) const {
    BranchId b = *this;
    b.word.insert(b.word.end(), next.word.begin(), next.word.end());
    return b;
  }
  std::string str() const {
    std::string s;
    for (int w : word) s += static_cast<char>(w < 10 ? '0' + w : 'a' + w - 10);
    return s;
  }
  bool operator==(const BranchId&) const = default;
};

inline constexpr int max_newton_iterations = 100;
inline constexpr double newton_tolerance = 1e-15;

namespace detail {

/// Safeguarded Newton for an increasing function on a bracket [lo, hi].
template <typename F>
double bracketed_newton(F&& fn, double lo, double hi, const char* what) {
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_newton_iterations; ++it) {
    double g, dg;
    fn(x, g, dg);
    if (g == 0.0) return x;
    if (g > 0.0)
      hi = x;
    else
      lo = x;
    double next = x - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - x);
    x = next;
    if (step <= newton_tolerance * std::max(1.0, std::abs(x)) || hi - lo <= 4e-16 * std::max(1.0, std::abs(x)))
      return x;
  }
  throw NewtonDivergence(what);
}

/// Solves d*x + f_pert(x, theta) = target for x on the real line.
inline double solve_fiber(const MapSpec& map, double theta, double target, double amp) {
  const double d = map.degree;
  auto fn = [&](double x, double& g, double& dg) {
    const TrigJet j = map.f_pert.jet(x, theta);
    g = d * x + j.value - target;
    dg = d + j.dx;
  };
  if (amp == 0.0) return target / d;
  return bracketed_newton(fn, (target - amp) / d - 1e-12, (target + amp) / d + 1e-12, "fiber equation");
}

}  // namespace detail

/// The branch k preimage of p: the unique q in [0,1)^2 with
/// d*q.x + f_pert(q) = p.x + k on the lift and F(q) = p on the torus.
inline Point2 preimage_branch(const MapSpec& map, const Point2& p, int k) {
  const double amp_f = map.f_pert.amplitude_bound();
  const double target = p.x + k;
  if (map.fibers_invariant()) return Point2{detail::solve_fiber(map, p.theta, target, amp_f), p.theta}.wrapped();
  const double B = map.epsilon * map.omega.amplitude_bound() + 1e-12;
  double x = 0.0;
  auto fn = [&](double t, double& g, double& dg) {
    x = detail::solve_fiber(map, t, target, amp_f);
    const LocalJet j = local_jet(map, x, t);
    g = t + map.epsilon * j.w - p.theta;
    dg = j.det() / j.fx;
  };
  const double theta = detail::bracketed_newton(fn, p.theta - B, p.theta + B, "theta equation");
  x = detail::solve_fiber(map, theta, target, amp_f);
  return Point2{x, theta}.wrapped();
}

struct PreimageNode {
  Point2 point;
  int digit = 0;
  Mat2 local{};  // D_q F at this node
  Mat2 jac{};    // D_q F^level, product back to the root
  double det = 1.0;
};

/// All preimages of p up to depth n, stored level by level. The children of
/// node i on level k sit at indices [i*d, (i+1)*d) on level k+1. The map
/// must outlive the tree.
class PreimageTree {
 public:
  PreimageTree(const MapSpec& map, const Point2& root, int n) : map_(&map), d_(map.degree), root_(root.wrapped()) {
    if (n < 0) throw ConfigError("preimage depth must be >= 0");
    PreimageNode r;
    r.point = root_;
    r.local = identity2();
    r.jac = identity2();
    levels_.push_back({r});
    for (int k = 1; k <= n; ++k) grow();
  }

  /// Appends the next level of preimages.
  void grow() {
    const auto& prev = levels_.back();
    std::vector<PreimageNode> cur(prev.size() * d_);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      for (int b = 0; b < d_; ++b) {
        PreimageNode& c = cur[i * d_ + b];
        c.point = preimage_branch(*map_, prev[i].point, b);
        c.digit = b;
        const LocalJet j = local_jet(*map_, c.point);
        c.local = jacobian(j);
        c.jac = mat_mul(prev[i].jac, c.local);
        c.det = prev[i].det * j.det();
      }
    }
    levels_.push_back(std::move(cur));
  }

  int degree() const { return d_; }
  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  const Point2& root() const { return root_; }
  const std::vector<PreimageNode>& level(int k) const { return levels_.at(k); }

  BranchId word(int k, std::size_t idx) const {
    BranchId b;
    b.word.resize(k);
    for (int s = k; s >= 1; --s) {
      b.word[s - 1] = static_cast<int>(idx % d_);
      idx /= d_;
    }
    return b;
  }

 private:
  const MapSpec* map_;
  int d_;
  Point2 root_;
  std::vector<std::vector<PreimageNode>> levels_;
};

struct Preimage {
  Point2 point;
  BranchId id;
  double det = 1.0;  // det D_q F^n
  Mat2 jac{};        // D_q F^n
};

inline std::vector<Preimage> preimages(const MapSpec& map, const Point2& p, int n) {
  if (n < 0 || n > 14) throw ConfigError("preimages: n must lie in [0, 14]");
  const PreimageTree tree(map, p, n);
  std::vector<Preimage> out;
  const auto& lv = tree.level(n);
  out.reserve(lv.size());
  for (std::size_t i = 0; i < lv.size(); ++i) out.push_back({lv[i].point, tree.word(n, i), lv[i].det, lv[i].jac});
  return out;
}

}  // namespace svph
