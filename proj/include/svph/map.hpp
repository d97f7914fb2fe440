#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "svph/errors.hpp"
#include "svph/trig_poly.hpp"

namespace svph {

inline double wrap01(double v) {
  double w = v - std::floor(v);
  return w >= 1.0 ? 0.0 : w;
}

/// Signed representative of v modulo 1 in [-1/2, 1/2).
inline double centered_mod1(double v) { return v - std::floor(v + 0.5); }

/// A point on the torus. Coordinates are kept in [0,1) unless a lift is
/// requested explicitly.
struct Point2 {
  double x = 0.0;
  double theta = 0.0;

  Point2 wrapped() const { return {wrap01(x), wrap01(theta)}; }
};

/// Distance on the torus: minimum over the integer translates.
inline double torus_distance(const Point2& p, const Point2& q) {
  return std::hypot(centered_mod1(p.x - q.x), centered_mod1(p.theta - q.theta));
}

/// F(x, theta) = (d x + f_pert(x, theta), theta + eps * omega(x, theta)) mod 1.
struct MapSpec {
  int degree = 2;
  TrigPoly2 f_pert;
  TrigPoly2 omega;
  double epsilon = 1.0;
  std::string name;

  int max_frequency() const { return std::max(f_pert.max_frequency(), omega.max_frequency()); }

  /// true when the second component is the identity (fibers are invariant)
  bool fibers_invariant() const { return epsilon == 0.0 || omega.is_zero(); }

  MapSpec with_epsilon(double e) const {
    MapSpec m = *this;
    m.epsilon = e;
    return m;
  }
};

/// Values and first partials of f and omega at a point; omega is unscaled.
struct LocalJet {
  double f = 0.0;  // lifted value d x + f_pert
  double fx = 0.0, ft = 0.0;
  double w = 0.0;
  double wx = 0.0, wt = 0.0;
  double eps = 0.0;

  double det() const { return fx * (1.0 + eps * wt) - ft * eps * wx; }
};

inline LocalJet local_jet(const MapSpec& map, double x, double theta) {
  const TrigBasis basis(x, theta, map.max_frequency());
  const TrigJet fj = map.f_pert.jet(basis);
  const TrigJet wj = map.omega.jet(basis);
  LocalJet j;
  j.f = map.degree * x + fj.value;
  j.fx = map.degree + fj.dx;
  j.ft = fj.dtheta;
  j.w = wj.value;
  j.wx = wj.dx;
  j.wt = wj.dtheta;
  j.eps = map.epsilon;
  return j;
}

inline LocalJet local_jet(const MapSpec& map, const Point2& p) { return local_jet(map, p.x, p.theta); }

/// F on the lift: no reduction modulo 1.
inline Point2 eval_lift(const MapSpec& map, const Point2& p) {
  const TrigBasis basis(p.x, p.theta, map.max_frequency());
  return {map.degree * p.x + map.f_pert.value(basis), p.theta + map.epsilon * map.omega.value(basis)};
}

inline Point2 eval(const MapSpec& map, const Point2& p) { return eval_lift(map, p).wrapped(); }

inline Point2 iterate(const MapSpec& map, Point2 p, int n) {
  for (int k = 0; k < n; ++k) p = eval(map, p);
  return p;
}

using Mat2 = std::array<std::array<double, 2>, 2>;

inline Mat2 mat_mul(const Mat2& a, const Mat2& b) {
  Mat2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

inline double mat_det(const Mat2& a) { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }

inline Mat2 mat_inverse(const Mat2& a) {
  const double d = mat_det(a);
  return {{{a[1][1] / d, -a[0][1] / d}, {-a[1][0] / d, a[0][0] / d}}};
}

inline Mat2 identity2() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }

inline Mat2 jacobian(const LocalJet& j) {
  return {{{j.fx, j.ft}, {j.eps * j.wx, 1.0 + j.eps * j.wt}}};
}

inline Mat2 jacobian(const MapSpec& map, const Point2& p) { return jacobian(local_jet(map, p)); }

/// D_p F^n, the product of Jacobians along the forward orbit of p.
inline Mat2 jacobian_n(const MapSpec& map, Point2 p, int n) {
  Mat2 acc = identity2();
  for (int k = 0; k < n; ++k) {
    acc = mat_mul(jacobian(map, p), acc);
    p = eval(map, p);
  }
  return acc;
}

inline double det_n(const MapSpec& map, Point2 p, int n) {
  double d = 1.0;
  for (int k = 0; k < n; ++k) {
    d *= local_jet(map, p).det();
    p = eval(map, p);
  }
  return d;
}

inline constexpr int supported_regularity = 5;

/// Mixed partials of f (lifted) and of the unscaled omega up to a given order.
/// Entry [i][j] is d^i/dx^i d^j/dtheta^j.
struct Partials {
  int order = 0;
  std::vector<std::vector<double>> f;
  std::vector<std::vector<double>> omega;
};

inline Partials partials(const MapSpec& map, const Point2& p, int order) {
  if (order < 0 || order > supported_regularity)
    throw ConfigError("partials: order must lie in [0, " + std::to_string(supported_regularity) + "]");
  Partials out;
  out.order = order;
  out.f.assign(order + 1, std::vector<double>(order + 1, 0.0));
  out.omega = out.f;
  for (int i = 0; i <= order; ++i) {
    for (int j = 0; i + j <= order; ++j) {
      out.f[i][j] = map.f_pert.derivative(i, j)(p.x, p.theta);
      out.omega[i][j] = map.omega.derivative(i, j)(p.x, p.theta);
    }
  }
  out.f[0][0] += map.degree * p.x;
  if (order >= 1) out.f[1][0] += map.degree;
  return out;
}

/// Grid estimate of sup or inf of a function over the torus, with the
/// Lipschitz slack L*h/2 already applied in the conservative direction.
struct GridBound {
  double raw = 0.0;
  double slack = 0.0;
  double value = 0.0;
};

template <typename F>
GridBound grid_sup(F&& g, int n, double lipschitz) {
  double m = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m = std::max(m, g((i + 0.5) / n, (j + 0.5) / n));
  const double slack = lipschitz * (1.0 / n) / 2.0;
  return {m, slack, m + slack};
}

template <typename F>
GridBound grid_inf(F&& g, int n, double lipschitz) {
  double m = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m = std::min(m, g((i + 0.5) / n, (j + 0.5) / n));
  const double slack = lipschitz * (1.0 / n) / 2.0;
  return {m, slack, m - slack};
}

/// Derivative sup-norms used throughout the checkable conditions, for the
/// effective second component eps*omega.
struct DerivativeNorms {
  GridBound fx_inf;       // lambda
  GridBound fx_sup;       // Lambda
  GridBound ft_sup;       // ||d_theta f||
  GridBound wx_sup;       // ||d_x (eps omega)||
  GridBound wt_sup;       // ||d_theta (eps omega)||
};

inline DerivativeNorms derivative_norms(const MapSpec& map, int grid) {
  const TrigPoly2 fpx = map.f_pert.derivative(1, 0);
  const TrigPoly2 fpt = map.f_pert.derivative(0, 1);
  const TrigPoly2 wx = map.omega.derivative(1, 0).scaled(map.epsilon);
  const TrigPoly2 wt = map.omega.derivative(0, 1).scaled(map.epsilon);
  DerivativeNorms n;
  n.fx_inf = grid_inf([&](double x, double t) { return map.degree + fpx(x, t); }, grid, fpx.lipschitz_bound());
  n.fx_sup = grid_sup([&](double x, double t) { return map.degree + fpx(x, t); }, grid, fpx.lipschitz_bound());
  n.ft_sup = grid_sup([&](double x, double t) { return std::abs(fpt(x, t)); }, grid, fpt.lipschitz_bound());
  n.wx_sup = grid_sup([&](double x, double t) { return std::abs(wx(x, t)); }, grid, wx.lipschitz_bound());
  n.wt_sup = grid_sup([&](double x, double t) { return std::abs(wt(x, t)); }, grid, wt.lipschitz_bound());
  // a sup-norm is never below zero, an infimum of |.|-free quantity is kept as is
  for (GridBound* b : {&n.ft_sup, &n.wx_sup, &n.wt_sup})
    if (b->raw == 0.0 && b->slack == 0.0) b->value = 0.0;
  return n;
}

struct DetGrowthReport {
  double lambda = 0.0;     // inf d_x f
  double Lambda = 0.0;     // sup d_x f
  double min_ratio = 0.0;  // min det D F^n / lambda^n
  double max_ratio = 0.0;  // max det D F^n / Lambda^n
  double c_bar = 0.0;      // smallest c with exp(-c eps n) lambda^n <= det <= exp(c eps n) Lambda^n
};

/// Sandwich e^{-c eps n} lambda^n <= det D_p F^n <= e^{c eps n} Lambda^n on
/// random samples.
inline DetGrowthReport det_growth_check(const MapSpec& map, int n, int samples, std::uint64_t seed = 1,
                                        int grid = 512) {
  if (n < 0 || n > 12) throw ConfigError("det_growth_check: n must lie in [0, 12]");
  const DerivativeNorms norms = derivative_norms(map, grid);
  DetGrowthReport r;
  r.lambda = norms.fx_inf.value;
  r.Lambda = norms.fx_sup.value;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  r.min_ratio = std::numeric_limits<double>::infinity();
  r.max_ratio = 0.0;
  double worst_log = 0.0;
  const double ln_lo = n * std::log(r.lambda), ln_hi = n * std::log(r.Lambda);
  for (int s = 0; s < samples; ++s) {
    const Point2 p{u(rng), u(rng)};
    const double d = det_n(map, p, n);
    if (!(d > 0.0)) throw ViolatedBound("det D F^n is not positive");
    const double ld = std::log(d);
    r.min_ratio = std::min(r.min_ratio, std::exp(ld - ln_lo));
    r.max_ratio = std::max(r.max_ratio, std::exp(ld - ln_hi));
    worst_log = std::max({worst_log, ln_lo - ld, ld - ln_hi});
  }
  if (worst_log <= 1e-12) {
    r.c_bar = 0.0;
    return r;
  }
  const double grad = map.omega.lipschitz_bound();
  if (map.epsilon == 0.0 || n == 0) throw ViolatedBound("det sandwich fails with eps = 0");
  r.c_bar = worst_log / (map.epsilon * n);
  if (r.c_bar > 10.0 * grad) throw ViolatedBound("det sandwich needs c_bar beyond 10*||grad omega||");
  return r;
}

}  // namespace svph
