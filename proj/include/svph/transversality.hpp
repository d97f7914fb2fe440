#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "svph/branches.hpp"
#include "svph/cones.hpp"
#include "svph/errors.hpp"
#include "svph/fiber.hpp"
#include "svph/map.hpp"
#include "svph/parallel.hpp"

namespace svph {

/// A line through the origin, span{(cos phi, sin phi)} with phi in [0, pi).
struct ProjectiveLine {
  double phi = 0.0;

  static ProjectiveLine from_slope(double s) {
    double a = std::atan(s);
    if (a < 0.0) a += std::numbers::pi;
    return {a};
  }
  static ProjectiveLine horizontal() { return {0.0}; }

  bool is_vertical() const { return std::abs(phi - 0.5 * std::numbers::pi) < 1e-15; }
  /// Slope of the line; infinite for the vertical line.
  double slope() const {
    if (is_vertical()) return std::numeric_limits<double>::infinity();
    return std::tan(phi);
  }
};

/// Image of the cone {(1, s) : |s| <= chi} under a matrix, as a closed
/// interval of slopes.
struct SlopeInterval {
  double lo = 0.0, hi = 0.0;

  bool contains(double s) const { return lo <= s && s <= hi; }
  bool intersects(const SlopeInterval& o) const { return !(hi < o.lo || o.hi < lo); }
};

inline SlopeInterval image_cone(const Mat2& J, double chi) {
  const double d1 = J[0][0] - J[0][1] * chi, d2 = J[0][0] + J[0][1] * chi;
  if (!(d1 > 0.0 && d2 > 0.0) && !(d1 < 0.0 && d2 < 0.0))
    throw DegenerateDirection("image cone contains the vertical direction");
  const double a = (J[1][0] - J[1][1] * chi) / d1, b = (J[1][0] + J[1][1] * chi) / d2;
  return {std::min(a, b), std::max(a, b)};
}

struct TransversalityReport {
  int n = 0;
  double value = 0.0;
  Point2 point;
  std::optional<ProjectiveLine> line;
  std::vector<BranchId> witness;
};

/// D_{z1}F^n C_u and D_{z2}F^n C_u meet only at 0, for the shrunk cone.
inline bool is_transversal(const MapSpec& map, const ConeParams& cones, const Point2& z1, const Point2& z2, int n) {
  const double gap = torus_distance(iterate(map, z1, n), iterate(map, z2, n));
  if (gap > 1e-8) throw NotSameFiber("forward images differ by " + std::to_string(gap));
  const double chi = cones.shrunk_chi_u();
  return !image_cone(jacobian_n(map, z1, n), chi).intersects(image_cone(jacobian_n(map, z2, n), chi));
}

// ---------------------------------------------------------------------------
// Weighted interval sweeps

namespace detail {

/// Weighted closed intervals with sorted endpoints for O(log) coverage queries.
class IntervalSet {
 public:
  IntervalSet(std::vector<SlopeInterval> iv, std::vector<double> w) : iv_(std::move(iv)), w_(std::move(w)) {
    const std::size_t n = iv_.size();
    std::vector<std::size_t> idx(n);
    los_.resize(n);
    his_.resize(n);
    lo_cum_.assign(n + 1, 0.0);
    hi_cum_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return iv_[a].lo < iv_[b].lo; });
    for (std::size_t k = 0; k < n; ++k) {
      los_[k] = iv_[idx[k]].lo;
      lo_cum_[k + 1] = lo_cum_[k] + w_[idx[k]];
    }
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return iv_[a].hi < iv_[b].hi; });
    for (std::size_t k = 0; k < n; ++k) {
      his_[k] = iv_[idx[k]].hi;
      hi_cum_[k + 1] = hi_cum_[k] + w_[idx[k]];
    }
  }

  std::size_t size() const { return iv_.size(); }
  const SlopeInterval& interval(std::size_t i) const { return iv_[i]; }
  double total() const { return lo_cum_.back(); }

  /// Weight of the intervals containing s.
  double coverage(double s) const {
    const std::size_t a = std::upper_bound(los_.begin(), los_.end(), s) - los_.begin();  // lo <= s
    const std::size_t b = std::lower_bound(his_.begin(), his_.end(), s) - his_.begin();  // hi < s
    return lo_cum_[a] - hi_cum_[b];
  }

  /// Weight of the intervals meeting interval i, i included.
  double overlap(std::size_t i) const {
    const std::size_t below = std::lower_bound(his_.begin(), his_.end(), iv_[i].lo) - his_.begin();  // hi < lo_i
    const std::size_t above = std::upper_bound(los_.begin(), los_.end(), iv_[i].hi) - los_.begin();  // lo <= hi_i
    return lo_cum_[above] - hi_cum_[below];
  }

  /// Sup of coverage over all slopes, attained on the finitely many arcs cut
  /// out by the endpoints: every endpoint, every arc midpoint and slope 0.
  std::pair<double, double> max_coverage() const {
    double best = coverage(0.0), arg = 0.0;
    auto probe = [&](double s) {
      const double c = coverage(s);
      if (c > best) {
        best = c;
        arg = s;
      }
    };
    std::vector<double> pts(los_);
    pts.insert(pts.end(), his_.begin(), his_.end());
    std::sort(pts.begin(), pts.end());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      probe(pts[k]);
      if (k + 1 < pts.size() && pts[k + 1] > pts[k]) probe(0.5 * (pts[k] + pts[k + 1]));
    }
    return {best, arg};
  }

 private:
  std::vector<SlopeInterval> iv_;
  std::vector<double> w_;
  std::vector<double> los_, his_, lo_cum_, hi_cum_;
};

inline IntervalSet level_cones(const PreimageTree& tree, int level, double chi) {
  const auto& lv = tree.level(level);
  std::vector<SlopeInterval> iv(lv.size());
  std::vector<double> w(lv.size());
  for (std::size_t i = 0; i < lv.size(); ++i) {
    iv[i] = image_cone(lv[i].jac, chi);
    w[i] = 1.0 / std::abs(lv[i].det);
  }
  return {std::move(iv), std::move(w)};
}

/// Cones D_zF^m C_u for z in F^{-m}(w), w = node i of `level`, read off the
/// subtree of a deeper tree with Jacobians taken relative to w.
inline IntervalSet subtree_cones(const PreimageTree& tree, int level, std::size_t i, int m, double chi) {
  std::vector<Mat2> rel{identity2()};
  std::vector<double> det{1.0};
  const int d = tree.degree();
  std::size_t first = i;
  for (int k = 1; k <= m; ++k) {
    first *= d;
    const auto& lv = tree.level(level + k);
    std::vector<Mat2> nrel(rel.size() * d);
    std::vector<double> ndet(rel.size() * d);
    for (std::size_t a = 0; a < rel.size(); ++a)
      for (int b = 0; b < d; ++b) {
        const PreimageNode& node = lv[first + a * d + b];
        nrel[a * d + b] = mat_mul(rel[a], node.local);
        ndet[a * d + b] = det[a] * mat_det(node.local);
      }
    rel.swap(nrel);
    det.swap(ndet);
  }
  std::vector<SlopeInterval> iv(rel.size());
  std::vector<double> w(rel.size());
  for (std::size_t a = 0; a < rel.size(); ++a) {
    iv[a] = image_cone(rel[a], chi);
    w[a] = 1.0 / std::abs(det[a]);
  }
  return {std::move(iv), std::move(w)};
}

inline std::vector<Point2> uniform_grid(int grid) {
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(grid) * grid);
  for (int j = 0; j < grid; ++j)
    for (int i = 0; i < grid; ++i) pts.push_back({(i + 0.5) / grid, (j + 0.5) / grid});
  return pts;
}

inline void check_depth(int n, int max, const char* what) {
  if (n < 0 || n > max) throw ConfigError(std::string(what) + ": depth must lie in [0, " + std::to_string(max) + "]");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// N, N-tilde

/// N(n, y) = max over z1 in F^{-n}(y) of the |det|^{-1} mass of the preimages
/// not transversal to z1.
inline TransversalityReport n_count(const MapSpec& map, const ConeParams& cones, const Point2& y, int n) {
  detail::check_depth(n, 10, "n_count");
  const PreimageTree tree(map, y, n);
  const detail::IntervalSet set = detail::level_cones(tree, n, cones.shrunk_chi_u());
  TransversalityReport r;
  r.n = n;
  r.point = tree.root();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double v = set.overlap(i);
    if (v > r.value) {
      r.value = v;
      arg = i;
    }
  }
  r.witness = {tree.word(n, arg)};
  return r;
}

/// N-tilde(n, y, L): |det|^{-1} mass of the preimages whose image cone
/// contains L.
inline double n_tilde(const MapSpec& map, const ConeParams& cones, const Point2& y, const ProjectiveLine& L, int n) {
  detail::check_depth(n, 10, "n_tilde");
  if (L.is_vertical()) return 0.0;
  const PreimageTree tree(map, y, n);
  return detail::level_cones(tree, n, cones.shrunk_chi_u()).coverage(L.slope());
}

/// sup over L of N-tilde(n, y, L) by the critical-angle scan.
inline TransversalityReport n_tilde_sup_line(const MapSpec& map, const ConeParams& cones, const Point2& y, int n) {
  detail::check_depth(n, 10, "n_tilde");
  const PreimageTree tree(map, y, n);
  const auto [v, s] = detail::level_cones(tree, n, cones.shrunk_chi_u()).max_coverage();
  TransversalityReport r;
  r.n = n;
  r.value = v;
  r.point = tree.root();
  r.line = ProjectiveLine::from_slope(s);
  return r;
}

/// Grid sup over y of sup_L N-tilde(n, y, L) (or of N(n, y) when `count`).
inline TransversalityReport grid_sup_transversality(const MapSpec& map, const ConeParams& cones, int n, int grid,
                                                    bool count) {
  const auto pts = detail::uniform_grid(grid);
  std::vector<TransversalityReport> out(pts.size());
  parallel_for(pts.size(), [&](std::size_t k) {
    out[k] = count ? n_count(map, cones, pts[k], n) : n_tilde_sup_line(map, cones, pts[k], n);
  });
  std::size_t best = 0;
  for (std::size_t k = 1; k < out.size(); ++k)
    if (out[k].value > out[best].value) best = k;
  return out[best];
}

// ---------------------------------------------------------------------------
// Submultiplicativity

struct SubmultiplicativityReport {
  int n = 0, m = 0;
  double Nt_nm = 0.0;  // grid sup of N-tilde(n+m)
  double Nt_n = 0.0, Nt_m = 0.0;
  double ratio = 0.0;  // max over y of N-tilde(n+m, y) / (N-tilde(n) N-tilde(m))
  Point2 worst_point;
};

/// All pairs n + m <= total. N-tilde(k) is the sup over the grid and over every
/// preimage of a grid point down to depth total - k, so the sup covers all
/// points entering the branch-splitting bound.
inline std::vector<SubmultiplicativityReport> submultiplicativity_table(const MapSpec& map, const ConeParams& cones,
                                                                        int total, int grid) {
  detail::check_depth(total, 10, "submultiplicativity");
  const double chi = cones.shrunk_chi_u();
  const auto pts = detail::uniform_grid(grid);
  // at_grid[y][k] = sup_L N-tilde(k, y); extended[y][k] = same sup also over preimages
  std::vector<std::vector<double>> at_grid(pts.size()), extended(pts.size());
  parallel_for(pts.size(), [&](std::size_t p) {
    const PreimageTree tree(map, pts[p], total);
    auto& g = at_grid[p];
    auto& e = extended[p];
    g.assign(total + 1, 0.0);
    e.assign(total + 1, 0.0);
    for (int k = 0; k <= total; ++k) g[k] = detail::level_cones(tree, k, chi).max_coverage().first;
    for (int lv = 0; lv <= total; ++lv)
      for (std::size_t i = 0; i < tree.level(lv).size(); ++i)
        for (int k = 0; k + lv <= total; ++k)
          e[k] = std::max(e[k], detail::subtree_cones(tree, lv, i, k, chi).max_coverage().first);
  });
  std::vector<double> sup(total + 1, 0.0);
  for (const auto& e : extended)
    for (int k = 0; k <= total; ++k) sup[k] = std::max(sup[k], e[k]);
  std::vector<SubmultiplicativityReport> table;
  for (int n = 0; n <= total; ++n)
    for (int m = 0; n + m <= total; ++m) {
      SubmultiplicativityReport r;
      r.n = n;
      r.m = m;
      r.Nt_n = sup[n];
      r.Nt_m = sup[m];
      for (std::size_t p = 0; p < pts.size(); ++p) {
        r.Nt_nm = std::max(r.Nt_nm, at_grid[p][n + m]);
        const double q = at_grid[p][n + m] / (sup[n] * sup[m]);
        if (q > r.ratio) {
          r.ratio = q;
          r.worst_point = pts[p];
        }
      }
      table.push_back(r);
    }
  return table;
}

inline SubmultiplicativityReport check_submultiplicativity(const MapSpec& map, const ConeParams& cones, int n, int m,
                                                           int grid) {
  if (n < 0 || m < 0 || n + m > 10) throw ConfigError("check_submultiplicativity: need n, m >= 0 and n + m <= 10");
  for (const auto& r : submultiplicativity_table(map, cones, n + m, grid))
    if (r.n == n && r.m == m) return r;
  throw ConfigError("unreachable");
}

// ---------------------------------------------------------------------------
// h_*-normalized transversality

struct FrakNReport {
  int n = 0;
  double value = 0.0;       // sup over lines
  double all_branches = 0.0;  // same sum without the cone restriction
  double shadow_bound = 0.0;  // (1/h_*)(L^n h_*) at the point
  Point2 point;
  ProjectiveLine line;
};

/// frak N(p, v, n) = h_*(p)^{-1} sum over preimages (y, eta) whose image cone
/// contains v of h_*(y, theta_p) / |det DF^n(y, eta)|, with the sup over v.
inline FrakNReport frak_n(const MapSpec& map, const ConeParams& cones, const FiberField& h, const Point2& p, int n,
                          std::optional<ProjectiveLine> v = std::nullopt) {
  detail::check_depth(n, 10, "frak_n");
  const PreimageTree tree(map, p, n);
  const auto& lv = tree.level(n);
  const Point2 root = tree.root();
  const double h0 = h(root);
  std::vector<SlopeInterval> iv(lv.size());
  std::vector<double> w(lv.size());
  FrakNReport r;
  r.n = n;
  r.point = root;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    iv[i] = image_cone(lv[i].jac, cones.shrunk_chi_u());
    const double inv_det = 1.0 / std::abs(lv[i].det);
    w[i] = h(lv[i].point.x, root.theta) * inv_det / h0;
    r.all_branches += w[i];
    r.shadow_bound += h(lv[i].point) * inv_det / h0;
  }
  const detail::IntervalSet set(std::move(iv), std::move(w));
  if (v) {
    r.line = *v;
    r.value = v->is_vertical() ? 0.0 : set.coverage(v->slope());
  } else {
    const auto [val, s] = set.max_coverage();
    r.value = val;
    r.line = ProjectiveLine::from_slope(s);
  }
  return r;
}

inline FrakNReport frak_n_sup(const MapSpec& map, const ConeParams& cones, const FiberField& h, int n, int grid) {
  const auto pts = detail::uniform_grid(grid);
  std::vector<FrakNReport> out(pts.size());
  parallel_for(pts.size(), [&](std::size_t k) { out[k] = frak_n(map, cones, h, pts[k], n); });
  FrakNReport best = out[0];
  for (const auto& r : out) {
    if (r.value > best.value) {
      const double keep = std::max(best.shadow_bound, r.shadow_bound);
      best = r;
      best.shadow_bound = keep;
    } else {
      best.shadow_bound = std::max(best.shadow_bound, r.shadow_bound);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Transversality onset

struct N0Point {
  Point2 point;
  int n = 0;          // first depth with a transversal pair; 0 when none up to n_max
  double gap = 0.0;   // max lo - min hi at that depth
  std::pair<BranchId, BranchId> witness;
  std::pair<Point2, Point2> witness_points;
};

struct N0Report {
  bool found = false;
  int n0 = 0;
  int n_max = 0;
  std::vector<N0Point> points;
};

/// First depth at which p owns two preimages with disjoint image cones: the
/// cone with the largest lower slope and the one with the smallest upper slope.
inline N0Point transversality_onset(const MapSpec& map, const ConeParams& cones, const Point2& p, int n_max) {
  detail::check_depth(n_max, 12, "n0_estimate");
  const double chi = cones.shrunk_chi_u();
  PreimageTree tree(map, p, 0);
  N0Point out;
  out.point = tree.root();
  for (int n = 1; n <= n_max; ++n) {
    tree.grow();
    const auto& lv = tree.level(n);
    std::size_t a = 0, b = 0;
    double max_lo = -std::numeric_limits<double>::infinity(), min_hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lv.size(); ++i) {
      const SlopeInterval s = image_cone(lv[i].jac, chi);
      if (s.lo > max_lo) {
        max_lo = s.lo;
        a = i;
      }
      if (s.hi < min_hi) {
        min_hi = s.hi;
        b = i;
      }
    }
    out.gap = max_lo - min_hi;
    if (out.gap > 0.0) {
      out.n = n;
      out.witness = {tree.word(n, a), tree.word(n, b)};
      out.witness_points = {lv[a].point, lv[b].point};
      return out;
    }
  }
  out.n = 0;
  return out;
}

inline N0Report n0_estimate(const MapSpec& map, const ConeParams& cones, int n_max, int grid) {
  const auto pts = detail::uniform_grid(grid);
  N0Report r;
  r.n_max = n_max;
  r.points.resize(pts.size());
  parallel_for(pts.size(), [&](std::size_t k) { r.points[k] = transversality_onset(map, cones, pts[k], n_max); });
  r.found = true;
  for (const auto& q : r.points) {
    if (q.n == 0) r.found = false;
    r.n0 = std::max(r.n0, q.n);
  }
  if (!r.found) r.n0 = 0;
  return r;
}

// ---------------------------------------------------------------------------
// Relation check and the main assumption

/// sup over the grid of L^n 1, read off preimage trees.
inline double grid_sup_transfer_one(const MapSpec& map, int n, int grid) {
  const auto pts = detail::uniform_grid(grid);
  std::vector<double> v(pts.size());
  parallel_for(pts.size(), [&](std::size_t k) {
    const PreimageTree tree(map, pts[k], n);
    double s = 0.0;
    for (const auto& q : tree.level(n)) s += 1.0 / std::abs(q.det);
    v[k] = s;
  });
  return *std::max_element(v.begin(), v.end());
}

struct RelationReport {
  int n = 0, m0 = 0;
  double alpha = 0.0;
  double N = 0.0, L_sup = 0.0, Ntilde = 0.0;
  double lhs = 0.0, rhs = 0.0, slack = 0.0;
  // unrooted form N(n) <= ||L^{n-m0} 1|| N-tilde(m0), the inequality the rooted one rounds
  double product_rhs = 0.0, product_slack = 0.0;
};

/// N(n)^{1/n} <= ||L^{n-m0} 1||^{1/n} (N-tilde(m0)^{1/m0})^alpha with m0 = ceil(alpha n).
inline RelationReport relation_check(const MapSpec& map, const ConeParams& cones, int n, double alpha, int grid) {
  detail::check_depth(n, 10, "relation_check");
  if (n < 1) throw ConfigError("relation_check: n must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("relation_check: alpha must lie in (0, 1]");
  RelationReport r;
  r.n = n;
  r.alpha = alpha;
  r.m0 = std::min(n, static_cast<int>(std::ceil(alpha * n - 1e-12)));
  r.N = grid_sup_transversality(map, cones, n, grid, true).value;
  r.L_sup = grid_sup_transfer_one(map, n - r.m0, grid);
  r.Ntilde = grid_sup_transversality(map, cones, r.m0, grid, false).value;
  r.lhs = std::pow(r.N, 1.0 / n);
  r.rhs = std::pow(r.L_sup, 1.0 / n) * std::pow(std::pow(r.Ntilde, 1.0 / r.m0), alpha);
  r.slack = r.rhs - r.lhs;
  r.product_rhs = r.L_sup * r.Ntilde;
  r.product_slack = r.product_rhs - r.N;
  return r;
}

struct MainAssumptionOptions {
  int grid = 8;           // y-grid for N-tilde
  int m_grid = 4;         // point grid for the cone entry time
  double sigma = 2.0;     // m_bar = sigma * m_chi_u
  int max_depth = 10;     // largest enumerable ceil(alpha n1)
  int empirical_n = 8;    // horizon of the measured rates
  int empirical_samples = 200;
};

struct MainAssumptionReport {
  int s = 0, n1 = 0, depth = 0;
  long long zeta_s = 0;
  bool analytic_constants = true;  // false when the measured rates were used
  double alpha = 0.0, mu = 1.0, lambda_minus = 0.0;
  double alpha_s = 0.0, beta_s = 0.0;
  int m_chi_u = 0;
  double m_bar = 0.0;
  double Ntilde = 0.0;
  double first = 0.0, second = 0.0, value = 0.0;
  std::string binding;
  bool pass = false;
  double nu0 = 0.0;  // smallest admissible nu_0; any nu_0 in [nu0, 1) works when pass
  std::string unverifiable = "condition with the constants C_1, K is not numeric and is not checked";
};

inline double ceil_alpha(double alpha, int n) { return std::ceil(alpha * n - 1e-12); }

/// max(mu^{zeta_s}/lambda_-, sqrt(N-tilde(ceil(alpha n1)) mu^{alpha_s n1 + beta_s m_bar})) < 1
/// with alpha_s = 2(2 + s - alpha), beta_s = 2(s + 2).
inline MainAssumptionReport main_assumption_check(const MapSpec& map, const ConeSetup& setup, int s, int n1,
                                                  const MainAssumptionOptions& opt = {}) {
  if (s < 1 || s > supported_regularity - 3) throw ConfigError("main_assumption_check: s must lie in [1, r-3]");
  if (n1 < 1) throw ConfigError("main_assumption_check: n1 must be >= 1");
  const HyperbolicityConstants& h = setup.constants;
  MainAssumptionReport r;
  r.s = s;
  r.n1 = n1;
  r.zeta_s = zeta(s);
  if (h.alpha > 0.0 && h.alpha <= 1.0) {
    r.alpha = h.alpha;
    r.mu = h.mu;
    r.lambda_minus = h.lambda_minus;
  } else {
    const EmpiricalConstants e =
        empirical_constants(map, setup.cones.chi_c, opt.empirical_n, opt.empirical_samples);
    r.analytic_constants = false;
    r.alpha = effective_alpha(h, e);
    r.mu = e.mu;
    r.lambda_minus = e.lambda_minus;
  }
  r.depth = static_cast<int>(ceil_alpha(r.alpha, n1));
  if (r.depth > opt.max_depth)
    throw DepthTooLarge("ceil(alpha n1) = " + std::to_string(r.depth) + " exceeds " + std::to_string(opt.max_depth));
  r.alpha_s = 2.0 * (2.0 + s - r.alpha);
  r.beta_s = 2.0 * (s + 2.0);
  for (const Point2& p : detail::uniform_grid(opt.m_grid))
    r.m_chi_u = std::max(r.m_chi_u, m_chi_u(map, setup.cones, p).m);
  r.m_bar = opt.sigma * r.m_chi_u;
  r.Ntilde = r.depth == 0 ? 1.0 : grid_sup_transversality(map, setup.cones, r.depth, opt.grid, false).value;
  r.first = std::exp(static_cast<double>(r.zeta_s) * std::log(r.mu)) / r.lambda_minus;
  r.second = std::sqrt(r.Ntilde * std::exp((r.alpha_s * n1 + r.beta_s * r.m_bar) * std::log(r.mu)));
  r.value = std::max(r.first, r.second);
  r.binding = r.first >= r.second ? "mu^zeta_s / lambda_-" : "sqrt(Ntilde mu^(alpha_s n1 + beta_s m_bar))";
  r.pass = r.value < 1.0;
  r.nu0 = r.value;
  return r;
}

}  // namespace svph
