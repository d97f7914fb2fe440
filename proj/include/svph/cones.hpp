#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <optional>
#include <string>
#include <vector>

#include "svph/errors.hpp"
#include "svph/branches.hpp"
#include "svph/map.hpp"

namespace svph {

inline constexpr double degenerate_denominator = 1e-9;

// ---------------------------------------------------------------------------
// Slope dynamics

/// Image slope of the direction (1, s) under D_pF, in raw (unscaled) slopes.
inline double slope_image(const LocalJet& j, double s) {
  const double den = j.fx + s * j.ft;
  if (std::abs(den) < degenerate_denominator) throw DegenerateDirection("d_x f + s d_theta f vanishes");
  return (j.eps * j.wx + (1.0 + j.eps * j.wt) * s) / den;
}

/// Slope field Xi_eps(p, u) acting on directions (1, eps*u).
inline double xi_unstable(const MapSpec& map, const Point2& p, double u) {
  const LocalJet j = local_jet(map, p);
  const double e = map.epsilon;
  const double den = j.fx + e * u * j.ft;
  if (std::abs(den) < degenerate_denominator) throw DegenerateDirection("xi_unstable denominator vanishes");
  return (j.wx + e * u * j.wt + u) / den;
}

/// Backward action on central directions (c, 1): the preimage direction under
/// D_pF is proportional to (xi_center(p, c), 1).
inline double xi_center(const LocalJet& j, double c) {
  const double den = j.fx - j.eps * j.wx * c;
  if (std::abs(den) < degenerate_denominator) throw DegenerateDirection("xi_center denominator vanishes");
  return ((1.0 + j.eps * j.wt) * c - j.ft) / den;
}

inline double xi_center(const MapSpec& map, const Point2& p, double c) { return xi_center(local_jet(map, p), c); }

/// Xi^{(k)}(p, u0) for k = 1..n along the forward orbit of p.
inline std::vector<double> iterate_slope(const MapSpec& map, Point2 p, double u0, int n) {
  if (n < 0 || n > 1000) throw ConfigError("iterate_slope: n must lie in [0, 1000]");
  std::vector<double> out;
  out.reserve(n);
  double u = u0;
  for (int k = 0; k < n; ++k) {
    u = xi_unstable(map, p, u);
    out.push_back(u);
    p = eval(map, p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cone parameters

struct ConeParams {
  double chi_u = 0.5;
  double chi_c = 1.0;
  double eps_cone = 0.05;
  double u_star = 0.0;
  double iota_star = 0.5;

  /// half-width (raw slope) of the shrunk unstable cone C_{eps,u}
  double shrunk_chi_u() const { return (1.0 - eps_cone) * chi_u; }
  double shrunk_chi_c() const { return (1.0 - eps_cone) * chi_c; }
};

struct HyperbolicityConstants {
  double lambda = 0.0;   // inf d_x f
  double Lambda = 0.0;   // sup d_x f
  double phi = 0.0;
  double Phi_minus = 0.0, Phi_plus = 0.0;
  double chi_u_lower = 0.0;  // open lower end of the admissible chi_u interval
  double chi_u_separate = 0.0;
  double chi_c_lower = 0.0;
  double a = 0.0, b = 0.0;
  double lambda_minus = 0.0, lambda_plus = 0.0;
  double mu_minus = 0.0, mu_plus = 0.0, mu = 1.0;
  double iota_star = 0.0;
  double C_star = 1.0;
  long long zeta_r = 0;
  double alpha = 0.0;
  bool general_admissible = true;  // chi_u, chi_c chosen inside the general admissible intervals
};

enum class ConePolicy {
  automatic,  // fast-slow choice eps*u_star when 0 < eps < 1, midpoint otherwise
  midpoint,
  fast_slow,
};

inline long long zeta(int r) {
  long long f = 1;
  for (int k = 2; k <= r + 1; ++k) f *= k;
  return 6 * f;
}

/// Largest ratio |Xi(p, +-chi_u)| / chi_u and |Xi^-(p, +-chi_c)| / chi_c on a grid.
inline double measure_iota(const MapSpec& map, double chi_u, double chi_c, int grid) {
  // Sup over cell centres plus the largest jump between neighbouring centres,
  // which bounds the variation within a cell.
  const auto g = static_cast<std::size_t>(grid);
  std::vector<double> v(g * g);
  for (std::size_t jy = 0; jy < g; ++jy) {
    for (std::size_t ix = 0; ix < g; ++ix) {
      const LocalJet j = local_jet(map, (ix + 0.5) / grid, (jy + 0.5) / grid);
      double w = 0.0;
      for (double sgn : {-1.0, 1.0}) {
        w = std::max(w, std::abs(slope_image(j, sgn * chi_u)) / chi_u);
        w = std::max(w, std::abs(xi_center(j, sgn * chi_c)) / chi_c);
      }
      v[jy * g + ix] = w;
    }
  }
  double worst = 0.0, jump = 0.0;
  for (std::size_t jy = 0; jy < g; ++jy)
    for (std::size_t ix = 0; ix < g; ++ix) {
      const double w = v[jy * g + ix];
      worst = std::max(worst, w);
      jump = std::max({jump, std::abs(w - v[jy * g + (ix + 1) % g]), std::abs(w - v[((jy + 1) % g) * g + ix])});
    }
  return worst + jump;
}

struct ConeSetup {
  ConeParams cones;
  HyperbolicityConstants constants;
};

/// Admissible cone intervals, the chosen cone apertures and the derived
/// hyperbolicity constants.
///
/// For 0 < eps < 1 the fast-slow aperture chi_u = eps*u_star is used. It
/// remains available when the general admissible interval is empty, provided
/// the cones are invariant on the grid; `general_admissible` records which case
/// applies.
inline ConeSetup cone_parameters(const MapSpec& map, int r = supported_regularity, int grid = 512,
                                 ConePolicy policy = ConePolicy::automatic) {
  const DerivativeNorms n = derivative_norms(map, grid);
  const double lam = n.fx_inf.value, Lam = n.fx_sup.value;
  const double ft = n.ft_sup.value, wx = n.wx_sup.value, wt = n.wt_sup.value;

  ConeParams c;
  {
    const TrigPoly2 ox = map.omega.derivative(1, 0);
    c.u_star = 2.0 * grid_sup([&](double x, double t) { return std::abs(ox(x, t)); }, grid, ox.lipschitz_bound()).value;
  }
  const bool fast_slow_regime = map.epsilon > 0.0 && map.epsilon < 1.0 && c.u_star > 0.0;
  const bool want_fast_slow =
      policy == ConePolicy::fast_slow || (policy == ConePolicy::automatic && fast_slow_regime);

  HyperbolicityConstants h;
  h.lambda = lam;
  h.Lambda = Lam;
  h.phi = lam - wt - 1.0;
  std::string violated;
  if (!(wx + wt < 0.5))
    violated = "condition (2) violated: ||d_x w|| + ||d_t w|| >= 1/2";
  else if (!(1.0 + ft + wt + wx < lam))
    violated = "condition (4) violated: 1 + ||d_t f|| + ||d_t w|| + ||d_x w|| >= lambda";
  else if (!(ft < 0.5 * (-1.0 + std::sqrt(1.0 + 2.0 * lam * lam / Lam))))
    violated = "condition (5) violated: ||d_t f|| too large";

  double lo = 0.0;
  if (violated.empty()) {
    const double disc = h.phi * h.phi - 4.0 * ft * wx;
    h.Phi_plus = h.phi + std::sqrt(disc);
    h.Phi_minus = h.phi - std::sqrt(disc);
    // Phi_-/(2||d_t f||) written as 2||d_x w||/Phi_+ stays finite as ||d_t f|| -> 0
    h.chi_u_lower = 2.0 * wx / h.Phi_plus;
    h.chi_c_lower = 2.0 * ft / h.Phi_plus;
    h.chi_u_separate = wx / (1.0 - wt);
    lo = std::max(h.chi_u_lower, h.chi_u_separate);
    if (!(lo < 1.0)) violated = "condition (2) violated: chi_u interval empty";
  }
  h.general_admissible = violated.empty();
  if (!h.general_admissible && !want_fast_slow) throw EmptyConeInterval(violated);

  if (want_fast_slow) {
    const double fs = map.epsilon * c.u_star;
    if (!(fs < 1.0)) throw EmptyConeInterval("fast-slow aperture eps*u_star >= 1");
    if (h.general_admissible && !(fs > lo)) {
      if (policy == ConePolicy::fast_slow)
        throw EmptyConeInterval("fast-slow aperture eps*u_star below the admissible interval");
      c.chi_u = 0.5 * (lo + 1.0);
    } else {
      c.chi_u = fs;
    }
  } else {
    c.chi_u = 0.5 * (lo + 1.0);
  }
  c.chi_c = 1.0;

  h.a = c.chi_u * ft / lam;
  h.b = wt + c.chi_c * wx;
  h.lambda_minus = (1.0 - h.a) * lam;
  h.lambda_plus = (1.0 + h.a) * Lam;
  // bounds for |(DF^n)^{-1} v|^{1/n} on the central cone
  h.mu_minus = 1.0 / (1.0 + h.b);
  h.mu_plus = h.b < 1.0 ? 1.0 / (1.0 - h.b) : std::numeric_limits<double>::infinity();
  h.mu = h.b < 1.0 ? std::max(1.0 / (1.0 - h.b), std::exp(h.b)) : std::numeric_limits<double>::infinity();
  h.iota_star = measure_iota(map, c.chi_u, c.chi_c, grid);
  if (!(h.iota_star < 1.0))
    throw EmptyConeInterval(h.general_admissible ? "cones not invariant on the grid"
                                               : violated + "; fast-slow cones not invariant either");
  c.iota_star = h.iota_star;
  c.eps_cone = 0.1 * (1.0 - h.iota_star);
  h.C_star = 1.0;
  h.zeta_r = zeta(r);
  h.alpha = std::log(h.lambda_minus / (h.mu * h.mu)) / std::log(h.lambda_plus);
  return {c, h};
}

// ---------------------------------------------------------------------------
// Hypothesis check

struct ConditionResult {
  std::string name;
  bool pass = false;
  double lhs = std::numeric_limits<double>::quiet_NaN();
  double rhs = std::numeric_limits<double>::quiet_NaN();
  double margin = std::numeric_limits<double>::quiet_NaN();  // rhs - lhs
  std::string note;
};

struct HypothesisReport {
  int r = supported_regularity;
  long long zeta_r = 0;
  std::vector<ConditionResult> conditions;
  std::optional<ConeSetup> setup;

  bool all_pass() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const ConditionResult& c) { return c.pass; });
  }
  const ConditionResult* find(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline ConditionResult less_than(std::string name, double lhs, double rhs, std::string note = {}) {
  ConditionResult c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.margin = rhs - lhs;
  c.pass = lhs < rhs;
  c.note = std::move(note);
  return c;
}

/// Checkable sufficient conditions (1)-(6), pinching and (H0), (H4).
/// Failures are data: nothing here throws for a bad map.
inline HypothesisReport check_hypotheses(const MapSpec& map, int r = supported_regularity, int grid = 512) {
  HypothesisReport rep;
  rep.r = r;
  rep.zeta_r = zeta(r);
  const DerivativeNorms n = derivative_norms(map, grid);
  const double lam = n.fx_inf.value, Lam = n.fx_sup.value;
  const double ft = n.ft_sup.value, wx = n.wx_sup.value, wt = n.wt_sup.value;

  const TrigPoly2 fpx = map.f_pert.derivative(1, 0);
  const TrigPoly2 fpt = map.f_pert.derivative(0, 1);
  const TrigPoly2 ewx = map.omega.derivative(1, 0).scaled(map.epsilon);
  const TrigPoly2 ewt = map.omega.derivative(0, 1).scaled(map.epsilon);
  const double h = 1.0 / grid;

  {
    // (1): sup_p [max(2(1+||w_x||), |f_t(p)|) - f_x(p)] < 0
    const double bound = 2.0 * (1.0 + wx);
    const double lip = fpx.lipschitz_bound() + fpt.lipschitz_bound();
    const GridBound g = grid_sup(
        [&](double x, double t) { return std::max(bound, std::abs(fpt(x, t))) - (map.degree + fpx(x, t)); }, grid,
        lip);
    rep.conditions.push_back(less_than("1", g.value, 0.0, "d_x f > max(2(1+||d_x w||), |d_t f|)"));
  }
  rep.conditions.push_back(less_than("2", wx + wt, 0.5, "||d_x w|| + ||d_t w|| < 1/2"));
  rep.conditions.push_back(
      less_than("3", wt, (1.0 + wx) / (lam - 1.0), "||d_t w|| < (1 + ||d_x w||)/(lambda - 1)"));
  rep.conditions.push_back(less_than("4", 1.0 + ft + wt + wx, lam, "1 + ||d_t f|| + ||d_t w|| + ||d_x w|| < lambda"));
  rep.conditions.push_back(less_than("5", ft, 0.5 * (-1.0 + std::sqrt(1.0 + 2.0 * lam * lam / Lam)),
                                     "||d_t f|| < (sqrt(1 + 2 lambda^2/Lambda) - 1)/2"));
  const double chi_c = 1.0;
  rep.conditions.push_back(less_than("6", chi_c * wx + wt, std::log(lam) / (4.0 * static_cast<double>(rep.zeta_r)),
                                     "chi_c ||d_x w|| + ||d_t w|| < ln(lambda)/(4 zeta_r)"));
  {
    // (H0): inf det DF > 0, slack from the product rule
    const double lip = fpx.lipschitz_bound() * (1.0 + wt) + Lam * ewt.lipschitz_bound() +
                       fpt.lipschitz_bound() * wx + ft * ewx.lipschitz_bound();
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < grid; ++j)
      for (int i = 0; i < grid; ++i) m = std::min(m, local_jet(map, (i + 0.5) * h, (j + 0.5) * h).det());
    const double inf_det = m - lip * h / 2.0;
    rep.conditions.push_back(less_than("H0", 0.0, inf_det, "inf det DF > 0"));
  }
  try {
    ConeSetup s = cone_parameters(map, r, grid);
    rep.setup = s;
    const auto& hc = s.constants;
    rep.conditions.push_back(less_than("pinching", static_cast<double>(rep.zeta_r) * std::log(hc.mu),
                                       std::log(hc.lambda_minus), "zeta_r ln(mu) < ln(lambda_-)"));
    rep.conditions.push_back(less_than("H1-iota", hc.iota_star, 1.0, "cone invariance iota_star < 1 on the grid"));
  } catch (const EmptyConeInterval& e) {
    ConditionResult c;
    c.name = "pinching";
    c.note = e.what();
    rep.conditions.push_back(c);
    ConditionResult ci;
    ci.name = "H1-iota";
    ci.note = e.what();
    rep.conditions.push_back(ci);
  }
  {
    const ConditionResult* c1 = rep.find("1");
    ConditionResult c = *c1;
    c.name = "H4";
    const double chi_c_lower = (lam - wt - 1.0) > 0.0 ? 2.0 * ft / (lam - wt - 1.0 + std::sqrt(std::max(
                                                                                     0.0, (lam - wt - 1.0) * (lam - wt - 1.0) - 4.0 * ft * wx)))
                                                      : std::numeric_limits<double>::infinity();
    c.pass = c1->pass && chi_c_lower < 1.0;
    c.note = "condition (1) and chi_c = 1 admissible";
    rep.conditions.push_back(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Expansion rates

struct RayleighRange {
  double min = 0.0;
  double max = 0.0;
};

/// Extremes of sqrt(v^T M v) for unit v at angles in [phi0, phi1], M symmetric.
inline RayleighRange rayleigh_on_arc(double m00, double m01, double m11, double phi0, double phi1) {
  auto q = [&](double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    return m00 * c * c + 2.0 * m01 * c * s + m11 * s * s;
  };
  double lo = std::min(q(phi0), q(phi1)), hi = std::max(q(phi0), q(phi1));
  const double base = 0.5 * std::atan2(2.0 * m01, m00 - m11);
  for (int k = -4; k <= 4; ++k) {
    const double phi = base + k * std::numbers::pi / 2.0;
    if (phi > phi0 && phi < phi1) {
      lo = std::min(lo, q(phi));
      hi = std::max(hi, q(phi));
    }
  }
  return {std::sqrt(std::max(lo, 0.0)), std::sqrt(std::max(hi, 0.0))};
}

struct ExpansionRates {
  double lambda_minus = 0.0, lambda_plus = 0.0;
  double mu_minus = 0.0, mu_plus = 0.0;
};

/// lambda^-_n, lambda^+_n over directions outside C_c of |DF^n v|/|v|, and
/// mu^-_n, mu^+_n over directions in C_c of |(DF^n)^{-1} v|/|v|.
inline ExpansionRates expansion_rates(const MapSpec& map, const Point2& p, int n, double chi_c = 1.0) {
  if (n < 0 || n > 20) throw ConfigError("expansion_rates: n must lie in [0, 20]");
  const Mat2 A = jacobian_n(map, p, n);
  const Mat2 B = mat_inverse(A);
  const double half_outside = std::atan(1.0 / chi_c);  // |phi| < atan(1/chi_c) is outside C_c
  const double half_inside = std::atan(chi_c);
  auto gram = [](const Mat2& M, double& m00, double& m01, double& m11) {
    m00 = M[0][0] * M[0][0] + M[1][0] * M[1][0];
    m01 = M[0][0] * M[0][1] + M[1][0] * M[1][1];
    m11 = M[0][1] * M[0][1] + M[1][1] * M[1][1];
  };
  double a00, a01, a11, b00, b01, b11;
  gram(A, a00, a01, a11);
  gram(B, b00, b01, b11);
  const RayleighRange ra = rayleigh_on_arc(a00, a01, a11, -half_outside, half_outside);
  const double pi2 = std::numbers::pi / 2.0;
  const RayleighRange rb = rayleigh_on_arc(b00, b01, b11, pi2 - half_inside, pi2 + half_inside);
  return {ra.min, ra.max, rb.min, rb.max};
}

/// Smallest C_star making the expansion-rate sandwich hold on random samples
/// for n = 1..n_max with the given rates.
inline double calibrate_c_star(const MapSpec& map, const HyperbolicityConstants& h, double chi_c, int n_max,
                               int samples, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double c = 1.0;
  for (int s = 0; s < samples; ++s) {
    const Point2 p{u(rng), u(rng)};
    for (int n = 1; n <= n_max; ++n) {
      const ExpansionRates e = expansion_rates(map, p, n, chi_c);
      c = std::max({c, std::pow(h.lambda_minus, n) / e.lambda_minus, e.lambda_plus / std::pow(h.lambda_plus, n),
                    std::pow(h.mu_minus, n) / e.mu_minus, e.mu_plus / std::pow(h.mu_plus, n)});
    }
  }
  return c;
}

/// Rates measured from n-step expansion over random samples, used where the
/// a priori constants are too pessimistic to be informative.
struct EmpiricalConstants {
  int n = 0;
  double lambda_minus = 0.0, lambda_plus = 0.0;
  double mu_minus = 0.0, mu_plus = 0.0, mu = 1.0;
  double alpha = 0.0;
};

inline EmpiricalConstants empirical_constants(const MapSpec& map, double chi_c, int n, int samples,
                                              std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EmpiricalConstants e;
  e.n = n;
  e.lambda_minus = std::numeric_limits<double>::infinity();
  e.mu_minus = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const ExpansionRates r = expansion_rates(map, {u(rng), u(rng)}, n, chi_c);
    e.lambda_minus = std::min(e.lambda_minus, r.lambda_minus);
    e.lambda_plus = std::max(e.lambda_plus, r.lambda_plus);
    e.mu_minus = std::min(e.mu_minus, r.mu_minus);
    e.mu_plus = std::max(e.mu_plus, r.mu_plus);
  }
  const double inv = 1.0 / n;
  e.lambda_minus = std::pow(e.lambda_minus, inv);
  e.lambda_plus = std::pow(e.lambda_plus, inv);
  e.mu_minus = std::pow(e.mu_minus, inv);
  e.mu_plus = std::pow(e.mu_plus, inv);
  e.mu = std::max({e.mu_plus, 1.0 / e.mu_minus, 1.0});
  e.alpha = std::log(e.lambda_minus / (e.mu * e.mu)) / std::log(e.lambda_plus);
  return e;
}

/// alpha from the a priori constants when it lies in (0, 1], else the
/// empirical value.
inline double effective_alpha(const HyperbolicityConstants& h, const EmpiricalConstants& e) {
  if (h.alpha > 0.0 && h.alpha <= 1.0) return h.alpha;
  return std::clamp(e.alpha, 1e-6, 1.0);
}

// ---------------------------------------------------------------------------
// Backward cone entry time

struct ConeEntryTime {
  int m = 0;          // worst case over branches
  int m_best = 0;     // best case over branches
  double log_inv_chi_u = 0.0;
  double ratio = 0.0;  // m / log(1/chi_u), the empirical c_2 level
  double deepest_excursion = 0.0;
};

namespace detail {
inline void cone_entry_dfs(const MapSpec& map, const Point2& p, double lo, double hi, int level, int max_depth,
                           double target, ConeEntryTime& out, bool& reached_all) {
  for (int k = 0; k < map.degree; ++k) {
    const Point2 q = preimage_branch(map, p, k);
    const LocalJet j = local_jet(map, q);
    const double a = xi_center(j, lo), b = xi_center(j, hi);
    const double width = std::max(std::abs(a), std::abs(b));
    if (width <= target) {
      out.m = std::max(out.m, level + 1);
      out.m_best = std::min(out.m_best, level + 1);
      continue;
    }
    if (level + 1 >= max_depth) {
      reached_all = false;
      out.deepest_excursion = std::max(out.deepest_excursion, width);
      continue;
    }
    cone_entry_dfs(map, q, a, b, level + 1, max_depth, target, out, reached_all);
  }
}
}  // namespace detail

/// Smallest n such that along every inverse branch of depth n through p every
/// direction outside the shrunk unstable cone is pulled into the shrunk
/// central cone.
inline ConeEntryTime m_chi_u(const MapSpec& map, const ConeParams& cones, const Point2& p, int max_depth = 14) {
  if (max_depth < 1 || max_depth > 14) throw ConfigError("m_chi_u: depth must lie in [1, 14]");
  ConeEntryTime out;
  out.m_best = max_depth + 1;
  const double C = 1.0 / cones.shrunk_chi_u();
  const double target = cones.shrunk_chi_c();
  bool reached_all = true;
  detail::cone_entry_dfs(map, p.wrapped(), -C, C, 0, max_depth, target, out, reached_all);
  if (!reached_all)
    throw NotReached("depth " + std::to_string(max_depth) + " exhausted, deepest slope excursion " +
                     std::to_string(out.deepest_excursion));
  out.log_inv_chi_u = std::log(1.0 / cones.chi_u);
  out.ratio = out.log_inv_chi_u > 0.0 ? out.m / out.log_inv_chi_u : 0.0;
  return out;
}


}  // namespace svph
