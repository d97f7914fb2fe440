#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "svph/branches.hpp"
#include "svph/cones.hpp"
#include "svph/errors.hpp"
#include "svph/map.hpp"

namespace svph {

/// Periodic cubic spline through (i/N, y_i): returns the second derivatives
/// at the nodes (cyclic tridiagonal solve, Sherman-Morrison).
inline std::vector<double> periodic_spline_moments(const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  const double h = 1.0 / n;
  // (M_{i-1} + 4 M_i + M_{i+1}) = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i)
    rhs[i] = 6.0 * (y[(i + 1) % n] - 2.0 * y[i] + y[(i + n - 1) % n]) / (h * h);
  // cyclic system with a=c=1, b=4
  const double gamma = -4.0;
  std::vector<double> bb(n, 4.0), u(n, 0.0), z(n), x(n), cp(n);
  bb[0] = 4.0 - gamma;
  bb[n - 1] = 4.0 - 1.0 * 1.0 / gamma;
  u[0] = gamma;
  u[n - 1] = 1.0;
  auto solve = [&](const std::vector<double>& r, std::vector<double>& out) {
    std::vector<double> d(n);
    cp[0] = 1.0 / bb[0];
    d[0] = r[0] / bb[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double den = bb[i] - cp[i - 1];
      cp[i] = 1.0 / den;
      d[i] = (r[i] - d[i - 1]) / den;
    }
    out[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = d[i] - cp[i] * out[i + 1];
  };
  solve(rhs, x);
  solve(u, z);
  const double fact = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
  for (std::size_t i = 0; i < n; ++i) m[i] = x[i] - fact * z[i];
  return m;
}

/// Closed curve t -> (x(t), t), t in [0,1), stored on N uniform samples.
/// x is kept on the lift; winding is x(t+1) - x(t).
struct CentralCurve {
  std::vector<double> x, dx, ddx, dddx;
  int winding = 0;

  std::size_t size() const { return x.size(); }
  double step() const { return 1.0 / static_cast<double>(x.size()); }

  /// Fills ddx, dddx from a periodic spline through the dx samples.
  void finish() {
    const std::size_t n = dx.size();
    const double h = step();
    const std::vector<double> m = periodic_spline_moments(dx);
    ddx.assign(n, 0.0);
    dddx.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      ddx[i] = (dx[j] - dx[i]) / h - h * (2.0 * m[i] + m[j]) / 6.0;
      dddx[i] = m[i];
    }
  }

  /// Cubic Hermite interpolation of x at any real t.
  double operator()(double t) const { return eval(t, nullptr); }

  double eval(double t, double* deriv) const {
    const std::size_t n = x.size();
    const double fl = std::floor(t);
    const double tt = (t - fl) * n;
    std::size_t i = static_cast<std::size_t>(tt);
    if (i >= n) i = n - 1;
    const std::size_t j = (i + 1) % n;
    const double s = tt - static_cast<double>(i);
    const double h = step();
    const double x0 = x[i];
    const double x1 = x[j] + (j == 0 ? winding : 0);
    const double m0 = dx[i] * h, m1 = dx[j] * h;
    const double s2 = s * s, s3 = s2 * s;
    const double v = (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * x1 + (s3 - s2) * m1;
    if (deriv)
      *deriv = ((6 * s2 - 6 * s) * x0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * x1 + (3 * s2 - 2 * s) * m1) / h;
    return v + winding * fl;
  }

  double sup_abs(const std::vector<double>& v) const {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
  }

  static CentralCurve from_function(const std::function<double(double)>& xf,
                                    const std::function<double(double)>& dxf, std::size_t samples = 2048) {
    CentralCurve c;
    c.x.resize(samples);
    c.dx.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      const double t = static_cast<double>(i) / samples;
      c.x[i] = xf(t);
      c.dx[i] = dxf(t);
    }
    c.finish();
    return c;
  }

  static CentralCurve vertical(double x0, std::size_t samples = 2048) {
    return from_function([x0](double) { return x0; }, [](double) { return 0.0; }, samples);
  }

  /// x(t) = x0 + a sin(2 pi k t)
  static CentralCurve sinusoid(double x0, double a, int k = 1, std::size_t samples = 2048) {
    return from_function([=](double t) { return x0 + a * std::sin(two_pi * k * t); },
                         [=](double t) { return a * two_pi * k * std::cos(two_pi * k * t); }, samples);
  }
};

/// Curve spec strings: "vertical:X" or "sine:X:A[:K]".
inline CentralCurve parse_curve(const std::string& spec, std::size_t samples = 2048) {
  auto fail = [&] { return ConfigError("curve spec '" + spec + "' must be vertical:X or sine:X:A[:K]"); };
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t q = spec.find(':', pos);
    parts.push_back(spec.substr(pos, q == std::string::npos ? std::string::npos : q - pos));
    if (q == std::string::npos) break;
    pos = q + 1;
  }
  try {
    if (parts[0] == "vertical" && parts.size() == 2) return CentralCurve::vertical(std::stod(parts[1]), samples);
    if (parts[0] == "sine" && (parts.size() == 3 || parts.size() == 4))
      return CentralCurve::sinusoid(std::stod(parts[1]), std::stod(parts[2]),
                                    parts.size() == 4 ? std::stoi(parts[3]) : 1, samples);
  } catch (const std::logic_error&) {
    throw fail();
  }
  throw fail();
}

/// h_n on the same parameter grid: F^n(nu(t)) = gamma(h(t)), h(t) - t periodic.
struct Reparam {
  std::vector<double> h, dh;

  double eval(double t, double* deriv) const {
    const std::size_t n = h.size();
    const double fl = std::floor(t);
    const double tt = (t - fl) * n;
    std::size_t i = static_cast<std::size_t>(tt);
    if (i >= n) i = n - 1;
    const std::size_t j = (i + 1) % n;
    const double s = tt - static_cast<double>(i);
    const double step = 1.0 / n;
    const double x0 = h[i], x1 = h[j] + (j == 0 ? 1.0 : 0.0);
    const double m0 = dh[i] * step, m1 = dh[j] * step;
    const double s2 = s * s, s3 = s2 * s;
    const double v = (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * x1 + (s3 - s2) * m1;
    if (deriv)
      *deriv =
          ((6 * s2 - 6 * s) * x0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * x1 + (3 * s2 - 2 * s) * m1) / step;
    return v + fl;
  }

  static Reparam identity(std::size_t n) {
    Reparam r;
    r.h.resize(n);
    r.dh.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) r.h[i] = static_cast<double>(i) / n;
    return r;
  }
};

struct PulledCurve {
  BranchId id;
  CentralCurve curve;
  Reparam reparam;
  double closure_defect = 0.0;  // |x(1) - x(0) - winding| from an extra solve at t = 1
};

namespace detail {

/// One backward step of a curve along branch k.
inline PulledCurve pull_back_once(const MapSpec& map, const PulledCurve& parent, int k) {
  const CentralCurve& g = parent.curve;
  const std::size_t n = g.size();
  double xmin = g.x[0], xmax = g.x[0];
  for (double v : g.x) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  const double A = map.f_pert.amplitude_bound();
  const double d = map.degree;
  const double B = map.epsilon * map.omega.amplitude_bound();
  const double lo = (xmin + k - A) / d - 1e-9, hi = (xmax + k + A) / d + 1e-9;

  PulledCurve out;
  out.id = parent.id;
  out.id.word.push_back(k);
  out.curve.x.resize(n);
  out.curve.dx.resize(n);
  out.reparam.h.resize(n);
  out.reparam.dh.resize(n);
  auto solve_at = [&](double t, double& xh, double& s, double& slope, double& ds) {
    auto fn = [&](double xv, double& G, double& dG) {
      const LocalJet j = local_jet(map, xv, t);
      s = t + map.epsilon * j.w;
      double gd;
      const double gx = g.eval(s, &gd);
      G = j.f - gx - k;
      dG = j.fx - gd * map.epsilon * j.wx;
    };
    // widen the bracket by the theta drift in x(s)
    const double spread = B * g.sup_abs(g.dx) / d;
    xh = bracketed_newton(fn, lo - spread, hi + spread, "curve pullback");
    const LocalJet j = local_jet(map, xh, t);
    s = t + map.epsilon * j.w;
    double gd;
    g.eval(s, &gd);
    slope = xi_center(j, gd);
    ds = 1.0 + map.epsilon * (j.wx * slope + j.wt);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    double xh, s, slope, ds;
    solve_at(t, xh, s, slope, ds);
    out.curve.x[i] = xh;
    out.curve.dx[i] = slope;
    double dh_parent;
    out.reparam.h[i] = parent.reparam.eval(s, &dh_parent);
    out.reparam.dh[i] = dh_parent * ds;
  }
  {
    double xh, s, slope, ds;
    solve_at(1.0, xh, s, slope, ds);
    const double w = xh - out.curve.x[0];
    out.curve.winding = static_cast<int>(std::lround(w));
    out.closure_defect = std::abs(w - out.curve.winding);
  }
  // keep the lift of x(0) in [0,1)
  const double shift = std::floor(out.curve.x[0]);
  for (double& v : out.curve.x) v -= shift;
  out.curve.finish();
  return out;
}

}  // namespace detail

/// Depth-first enumeration of the d^n pullbacks of gamma; visit(curve) is
/// called on each leaf in branch-word order. Holds only one root-to-leaf path.
template <typename Visit>
void for_each_pullback(const MapSpec& map, const CentralCurve& gamma, int n, Visit&& visit) {
  if (n < 0 || n > 12) throw ConfigError("pull_back_curve: n must lie in [0, 12]");
  PulledCurve root;
  root.curve = gamma;
  root.reparam = Reparam::identity(gamma.size());
  std::function<void(const PulledCurve&, int)> rec = [&](const PulledCurve& c, int level) {
    if (level == n) {
      visit(c);
      return;
    }
    for (int k = 0; k < map.degree; ++k) rec(detail::pull_back_once(map, c, k), level + 1);
  };
  rec(root, 0);
}

inline std::vector<PulledCurve> pull_back_curve(const MapSpec& map, const CentralCurve& gamma, int n) {
  std::vector<PulledCurve> out;
  for_each_pullback(map, gamma, n, [&](const PulledCurve& c) { out.push_back(c); });
  return out;
}

/// max over samples of the torus distance between F^n(nu(t)) and gamma(h(t)).
inline double pullback_residual(const MapSpec& map, const CentralCurve& gamma, const PulledCurve& c, int n,
                                 std::size_t stride = 1) {
  double worst = 0.0;
  const std::size_t N = c.curve.size();
  for (std::size_t i = 0; i < N; i += stride) {
    const double t = static_cast<double>(i) / N;
    const Point2 img = iterate(map, Point2{c.curve.x[i], t}.wrapped(), n);
    const double s = c.reparam.h[i];
    worst = std::max(worst, torus_distance(img, Point2{gamma(s), s}.wrapped()));
  }
  return worst;
}

struct CurveClassReport {
  bool pass = false;
  bool closed = false;
  bool homotopy = false;
  bool tangent_in_cone = false;
  bool derivative_bounds = false;
  double tangent_margin = 0.0;  // chi_c - max|x'|
  std::vector<double> derivative_norms;    // ||x^(l)|| for l = 2..j
  std::vector<double> derivative_margins;  // c^((l-1)!) - ||x^(l)||
};

/// Admissibility conditions: closed, class (0,1), tangent in C_c and
/// ||x^(l)|| <= c^((l-1)!) for 2 <= l <= j.
inline CurveClassReport curve_class_check(const CentralCurve& nu, double c, int j, double chi_c = 1.0,
                                          double closure_defect = 0.0) {
  if (j < 1 || j > 3) throw ConfigError("curve_class_check: j must lie in [1, 3]");
  CurveClassReport r;
  r.closed = closure_defect <= 1e-9;
  r.homotopy = nu.winding == 0;
  r.tangent_margin = chi_c - nu.sup_abs(nu.dx);
  r.tangent_in_cone = r.tangent_margin >= 0.0;
  r.derivative_bounds = true;
  for (int l = 2; l <= j; ++l) {
    const double norm = nu.sup_abs(l == 2 ? nu.ddx : nu.dddx);
    const double bound = std::pow(c, l == 2 ? 1.0 : 2.0);
    r.derivative_norms.push_back(norm);
    r.derivative_margins.push_back(bound - norm);
    if (norm > bound) r.derivative_bounds = false;
  }
  r.pass = r.closed && r.homotopy && r.tangent_in_cone && r.derivative_bounds;
  return r;
}

/// Smallest gap mod 1 between distinct pullback curves over all samples; a
/// positive value means the curves are pairwise disjoint.
inline double pullback_min_gap(const std::vector<PulledCurve>& curves) {
  if (curves.size() < 2) return 1.0;
  const std::size_t N = curves.front().curve.size();
  double gap = 1.0;
  std::vector<double> xs(curves.size());
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t c = 0; c < curves.size(); ++c) xs[c] = wrap01(curves[c].curve.x[i]);
    std::sort(xs.begin(), xs.end());
    for (std::size_t c = 0; c + 1 < xs.size(); ++c) gap = std::min(gap, xs[c + 1] - xs[c]);
    gap = std::min(gap, xs.front() + 1.0 - xs.back());
  }
  return gap;
}

struct DistortionReport {
  double max_log_ratio = 0.0;
  double bound_factor = 0.0;        // mu^n C_{mu,n}
  double worst_margin = 0.0;        // min over pairs of bound - log ratio
  double empirical_constant = 0.0;  // max log ratio / (mu^n C_{mu,n} |x - y|)
  double C_mu_n = 0.0;
};

inline double C_mu_n(double mu, int n) { return mu > 1.0 ? std::min<double>(n, 1.0 / (mu - 1.0)) : n; }

/// Compares lambda^+_n at pairs of points on the pullbacks of gamma under F^n
/// with exp(mu^n C_{mu,n} |x - y| (1 + slack)).
inline DistortionReport distortion_check(const MapSpec& map, const CentralCurve& gamma, int n, int pairs, double mu,
                                         double chi_c = 1.0, double slack = 0.0, std::uint64_t seed = 3,
                                         int max_curves = 8) {
  DistortionReport r;
  r.C_mu_n = C_mu_n(mu, n);
  r.bound_factor = std::pow(mu, n) * r.C_mu_n;
  r.worst_margin = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int seen = 0;
  for_each_pullback(map, gamma, n, [&](const PulledCurve& c) {
    if (seen++ >= max_curves) return;
    for (int k = 0; k < pairs; ++k) {
      const double t1 = u(rng), t2 = u(rng);
      const Point2 a = Point2{c.curve(t1), t1}.wrapped(), b = Point2{c.curve(t2), t2}.wrapped();
      const double dist = torus_distance(a, b);
      if (dist == 0.0) continue;
      const double la = expansion_rates(map, a, n, chi_c).lambda_plus;
      const double lb = expansion_rates(map, b, n, chi_c).lambda_plus;
      const double lr = std::abs(std::log(la / lb));
      const double bound = r.bound_factor * dist * (1.0 + slack);
      r.max_log_ratio = std::max(r.max_log_ratio, lr);
      r.worst_margin = std::min(r.worst_margin, bound - lr);
      r.empirical_constant = std::max(r.empirical_constant, lr / (r.bound_factor * dist));
    }
  });
  return r;
}

}  // namespace svph
