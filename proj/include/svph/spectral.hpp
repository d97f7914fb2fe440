#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "svph/errors.hpp"
#include "svph/fiber.hpp"
#include "svph/fourier.hpp"
#include "svph/grid.hpp"
#include "svph/map.hpp"
#include "svph/parallel.hpp"
#include "svph/transfer.hpp"

namespace svph {

// ---------------------------------------------------------------------------
// Eigenpairs

struct EigenOptions {
  double tolerance = 1e-10;    // target residual |A x - nu x| / |x|
  double stall = 1e-6;         // SolverStall above this after the iteration cap
  int max_iterations = 5000;
  std::size_t dense_limit = 1500;  // dense solve at or below this dimension
  std::uint64_t seed = 11;
};

struct Eigenpairs {
  std::vector<cplx> values;      // by decreasing modulus
  std::vector<double> residuals;
  Eigen::MatrixXcd vectors;      // unit columns
  int iterations = 0;
  bool dense = false;
};

namespace detail {

template <typename Apply>
Eigenpairs ritz_pairs(Apply&& apply, const Eigen::MatrixXcd& V, int k) {
  const Eigen::Index b = V.cols();
  Eigen::MatrixXcd AV(V.rows(), b);
  for (Eigen::Index c = 0; c < b; ++c) AV.col(c) = apply(V.col(c));
  const Eigen::MatrixXcd H = V.adjoint() * AV;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H);
  std::vector<Eigen::Index> order(b);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto a, auto c) { return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(c)); });
  Eigenpairs out;
  out.vectors.resize(V.rows(), k);
  for (int i = 0; i < k; ++i) {
    const Eigen::VectorXcd y = es.eigenvectors().col(order[i]);
    const cplx nu = es.eigenvalues()(order[i]);
    Eigen::VectorXcd x = V * y;
    const Eigen::VectorXcd Ax = AV * y;
    const double nx = x.norm();
    out.values.push_back(nu);
    out.residuals.push_back((Ax - nu * x).norm() / nx);
    out.vectors.col(i) = x / nx;
  }
  return out;
}

template <typename Apply>
Eigenpairs subspace_iteration(Apply&& apply, Eigen::Index n, int k, const EigenOptions& opt) {
  const Eigen::Index b = std::min<Eigen::Index>(n, k + std::max(4, k));
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd V(n, b);
  for (Eigen::Index c = 0; c < b; ++c)
    for (Eigen::Index r = 0; r < n; ++r) V(r, c) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(V);
  V = qr.householderQ() * Eigen::MatrixXcd::Identity(n, b);
  Eigenpairs best;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    for (Eigen::Index c = 0; c < b; ++c) V.col(c) = apply(V.col(c));
    qr.compute(V);
    V = qr.householderQ() * Eigen::MatrixXcd::Identity(n, b);
    if (it % 10 == 0 || it == opt.max_iterations) {
      best = ritz_pairs(apply, V, k);
      best.iterations = it;
      if (*std::max_element(best.residuals.begin(), best.residuals.end()) <= opt.tolerance) return best;
    }
  }
  if (*std::max_element(best.residuals.begin(), best.residuals.end()) > opt.stall)
    throw SolverStall("subspace iteration residual " +
                      std::to_string(*std::max_element(best.residuals.begin(), best.residuals.end())));
  return best;
}

inline Eigenpairs dense_eigenpairs(const Eigen::MatrixXcd& A, int k) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A);
  const Eigen::Index n = A.rows();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto a, auto c) { return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(c)); });
  Eigenpairs out;
  out.dense = true;
  out.vectors.resize(n, k);
  for (int i = 0; i < k; ++i) {
    const cplx nu = es.eigenvalues()(order[i]);
    Eigen::VectorXcd x = es.eigenvectors().col(order[i]);
    x /= x.norm();
    out.values.push_back(nu);
    out.residuals.push_back((A * x - nu * x).norm());
    out.vectors.col(i) = x;
  }
  return out;
}

inline Eigen::MatrixXcd dense_of(const DiscreteOperator& op) {
  if (op.kind == OperatorKind::fourier) return op.fourier;
  return Eigen::MatrixXd(op.ulam).cast<cplx>();
}

}  // namespace detail

/// Top-k eigenpairs of the operator (or of its adjoint).
inline Eigenpairs top_eigenpairs(const DiscreteOperator& op, int k, const EigenOptions& opt = {}, bool adjoint = false) {
  const auto n = static_cast<Eigen::Index>(op.dimension());
  if (k < 1 || k > n) throw ConfigError("top_eigenpairs: k must lie in [1, dimension]");
  if (static_cast<std::size_t>(n) <= opt.dense_limit) {
    const Eigen::MatrixXcd A = detail::dense_of(op);
    return detail::dense_eigenpairs(adjoint ? Eigen::MatrixXcd(A.adjoint()) : A, k);
  }
  if (op.kind == OperatorKind::ulam) {
    const Eigen::SparseMatrix<double> At = op.ulam.transpose();
    auto apply = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
      const Eigen::VectorXd re = v.real(), im = v.imag();
      const Eigen::VectorXd a = adjoint ? Eigen::VectorXd(At * re) : Eigen::VectorXd(op.ulam * re);
      const Eigen::VectorXd b = adjoint ? Eigen::VectorXd(At * im) : Eigen::VectorXd(op.ulam * im);
      Eigen::VectorXcd out(v.size());
      out.real() = a;
      out.imag() = b;
      return out;
    };
    return detail::subspace_iteration(apply, n, k, opt);
  }
  const Eigen::MatrixXcd A = adjoint ? Eigen::MatrixXcd(op.fourier.adjoint()) : op.fourier;
  return detail::subspace_iteration([&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd { return A * v; }, n, k, opt);
}

struct SpectralReport {
  Eigenpairs pairs;
  std::vector<int> peripheral;       // indices into pairs.values with |nu| > 1 - delta_gap
  double delta_gap = 0.05;
  double cesaro_discrepancy = 0.0;   // Cesaro average vs spectral projector on random vectors
  int cesaro_terms = 0;
  bool roots_of_unity = true;        // every peripheral value satisfies |nu^q - 1| <= 10 residual for some q <= N
  std::vector<int> root_orders;
};

/// Top-k eigenvalues, the peripheral group and the Cesaro check of the
/// peripheral projectors.
inline SpectralReport peripheral_spectrum(const DiscreteOperator& op, int k, const EigenOptions& opt = {},
                                          double delta_gap = 0.05, int cesaro_terms = 200, int probes = 10) {
  SpectralReport r;
  r.delta_gap = delta_gap;
  r.cesaro_terms = cesaro_terms;
  r.pairs = top_eigenpairs(op, k, opt);
  for (int i = 0; i < k; ++i)
    if (std::abs(r.pairs.values[i]) > 1.0 - delta_gap) r.peripheral.push_back(i);
  const int N = static_cast<int>(r.peripheral.size());
  if (N == 0) return r;
  for (int i : r.peripheral) {
    const cplx nu = r.pairs.values[i];
    const double tol = std::max(10.0 * r.pairs.residuals[i], 1e-9);
    int order = 0;
    cplx pw = 1.0;
    for (int q = 1; q <= N; ++q) {
      pw *= nu;
      if (std::abs(pw - 1.0) <= tol) {
        order = q;
        break;
      }
    }
    r.root_orders.push_back(order);
    if (order == 0) r.roots_of_unity = false;
  }
  // left eigenvectors through the adjoint
  const Eigenpairs left = top_eigenpairs(op, k, opt, true);
  const auto n = static_cast<Eigen::Index>(op.dimension());
  std::mt19937_64 rng(opt.seed + 1);
  std::normal_distribution<double> g;
  for (int pr = 0; pr < probes; ++pr) {
    Eigen::VectorXcd v(n);
    for (Eigen::Index a = 0; a < n; ++a) v(a) = g(rng);
    for (int i : r.peripheral) {
      const cplx nu = r.pairs.values[i];
      std::size_t best = 0;
      for (std::size_t j = 1; j < left.values.size(); ++j)
        if (std::abs(std::conj(left.values[j]) - nu) < std::abs(std::conj(left.values[best]) - nu)) best = j;
      const Eigen::VectorXcd rv = r.pairs.vectors.col(i), lv = left.vectors.col(best);
      const Eigen::VectorXcd proj = rv * (lv.dot(v) / lv.dot(rv));
      Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n), cur = v;
      cplx w = 1.0;
      for (int t = 0; t < cesaro_terms; ++t) {
        acc += w * cur;
        cur = op.apply(cur);
        w /= nu;
      }
      acc /= static_cast<double>(cesaro_terms);
      r.cesaro_discrepancy = std::max(r.cesaro_discrepancy, (acc - proj).norm() / v.norm());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// SRB densities

struct UlamFixedPoint {
  GridFunction density;
  double residual = 0.0;  // L1 norm of P h - h
  int iterations = 0;
};

/// Fixed density of a column-stochastic Ulam operator by power iteration.
inline UlamFixedPoint ulam_fixed_density(const DiscreteOperator& op, double tol = 1e-12, int max_iter = 200000) {
  if (op.kind != OperatorKind::ulam) throw ConfigError("ulam_fixed_density needs an Ulam operator");
  UlamFixedPoint out;
  GridFunction h(op.nx, op.nt, 1.0);
  for (int it = 1; it <= max_iter; ++it) {
    GridFunction next = op.apply(h);
    next.normalize();
    out.residual = l1_distance(next, h);
    h = std::move(next);
    out.iterations = it;
    if (out.residual <= tol) break;
  }
  if (out.residual > 1e-8) throw SolverStall("Ulam power iteration residual " + std::to_string(out.residual));
  out.density = std::move(h);
  return out;
}

struct OrbitOptions {
  std::uint64_t steps = 100000000;
  int seeds = 64;
  int burn_in = 1000;
  std::uint64_t seed = 2024;
};

struct OrbitHistogram {
  GridFunction density;
  std::vector<double> seed_means;  // per-seed mean of cos(2 pi theta)
  bool seeds_disagree = false;
};

/// Normalized histogram of long orbits from Lebesgue-random seeds.
inline OrbitHistogram orbit_histogram(const MapSpec& map, std::size_t nx, std::size_t nt, const OrbitOptions& opt = {}) {
  if (opt.seeds < 1) throw ConfigError("orbit_histogram: need at least one seed");
  const std::uint64_t per = opt.steps / opt.seeds;
  std::vector<std::vector<std::uint32_t>> counts(opt.seeds);
  std::vector<double> means(opt.seeds);
  parallel_for(opt.seeds, [&](std::size_t s) {
    std::mt19937_64 rng(opt.seed + 7919 * s);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Point2 p{u(rng), u(rng)};
    for (int b = 0; b < opt.burn_in; ++b) p = eval(map, p);
    auto& c = counts[s];
    c.assign(nx * nt, 0);
    double acc = 0.0;
    for (std::uint64_t t = 0; t < per; ++t) {
      const std::size_t i = std::min(nx - 1, static_cast<std::size_t>(p.x * nx));
      const std::size_t j = std::min(nt - 1, static_cast<std::size_t>(p.theta * nt));
      ++c[j * nx + i];
      acc += std::cos(two_pi * p.theta);
      p = eval(map, p);
    }
    means[s] = acc / per;
  });
  OrbitHistogram out;
  out.density = GridFunction(nx, nt);
  for (const auto& c : counts)
    for (std::size_t k = 0; k < c.size(); ++k) out.density.values[k] += c[k];
  out.density.normalize();
  out.seed_means = means;
  if (opt.seeds > 2) {
    const double m = std::accumulate(means.begin(), means.end(), 0.0) / opt.seeds;
    double v = 0.0;
    for (double x : means) v += (x - m) * (x - m);
    const double sd = std::sqrt(v / (opt.seeds - 1));
    int outliers = 0;
    for (double x : means)
      if (std::abs(x - m) > 3.0 * sd) ++outliers;
    // more 3-sigma outliers than chance allows points at several physical measures
    out.seeds_disagree = outliers > 2;
  }
  return out;
}

enum class SrbMethod { ulam, orbit, both };

struct SrbOptions {
  std::size_t nx = 256, nt = 256;
  SrbMethod method = SrbMethod::both;
  OrbitOptions orbit;
  bool check_uniqueness = true;
};

struct SrbResult {
  std::optional<GridFunction> ulam;
  std::optional<GridFunction> orbit;
  double ulam_residual = 0.0;
  double l1_between = -1.0;      // L1 distance between the routes when both ran
  double second_modulus = 0.0;   // |nu_2| of the Ulam operator
  bool non_unique = false;
  std::vector<std::string> warnings;
  bool degenerate_fibers = false;  // eps = 0 or omega = 0: every fiber is invariant
};

inline SrbResult srb_density(const MapSpec& map, const SrbOptions& opt = {}) {
  SrbResult r;
  r.degenerate_fibers = map.fibers_invariant();
  if (r.degenerate_fibers) r.warnings.push_back("fibers are invariant; the density is one member of a family");
  if (opt.method != SrbMethod::orbit) {
    const DiscreteOperator op = ulam_matrix(map, opt.nx, opt.nt);
    UlamFixedPoint fp = ulam_fixed_density(op);
    r.ulam_residual = fp.residual;
    r.ulam = std::move(fp.density);
    if (opt.check_uniqueness) {
      EigenOptions eo;
      eo.tolerance = 1e-8;
      eo.max_iterations = 3000;
      eo.stall = 1.0;
      const Eigenpairs ep = top_eigenpairs(op, 2, eo);
      r.second_modulus = std::abs(ep.values[1]);
      if (r.second_modulus > 1.0 - 1e-3) {
        r.non_unique = true;
        r.warnings.push_back("NonUniqueWarning: second Ulam eigenvalue within 1e-3 of 1");
      }
    }
  }
  if (opt.method != SrbMethod::ulam) {
    OrbitHistogram h = orbit_histogram(map, opt.nx, opt.nt, opt.orbit);
    if (h.seeds_disagree) {
      r.non_unique = true;
      r.warnings.push_back("NonUniqueWarning: orbit seeds disagree beyond 3 sigma");
    }
    r.orbit = std::move(h.density);
  }
  if (r.ulam && r.orbit) r.l1_between = l1_distance(*r.ulam, *r.orbit);
  return r;
}

// ---------------------------------------------------------------------------
// Weak norm and factorization

inline constexpr int default_weak_cutoff = 64;

/// Band-limited dual norm: max over |xi| <= K of |g^(xi)| / (1 + 2 pi |xi|).
inline double weak_norm(const GridFunction& g, int K = default_weak_cutoff) {
  const GridSpectrum s(g);
  const int kx = std::min(K, s.kx_max()), kt = std::min(K, s.kt_max());
  double best = 0.0;
  for (int l = -kt; l <= kt; ++l)
    for (int k = -kx; k <= kx; ++k) {
      const double r = std::hypot(k, l);
      if (r > K) continue;
      best = std::max(best, std::abs(s.at(k, l)) / (1.0 + two_pi * r));
    }
  return best;
}

struct FactorizationReport {
  double error = 0.0;
  std::vector<double> beta;  // theta marginal of h
};

/// Weak distance between h and h_* beta, beta(theta) = int h(y, theta) dy,
/// with hstar the fiber densities on the grid of h (see fiber_h_star_grid).
inline FactorizationReport factorization_error(const GridFunction& h, const GridFunction& hstar,
                                               int K = default_weak_cutoff) {
  if (h.nx != hstar.nx || h.nt != hstar.nt) throw ConfigError("factorization_error: grid mismatch");
  FactorizationReport r;
  r.beta = h.theta_marginal();
  GridFunction g(h.nx, h.nt);
  for (std::size_t j = 0; j < h.nt; ++j)
    for (std::size_t i = 0; i < h.nx; ++i) g.at(i, j) = h.at(i, j) - hstar.at(i, j) * r.beta[j];
  r.error = weak_norm(g, K);
  return r;
}

/// Discretization scale of the grid fiber densities: weak distance between
/// the Ulam fiber densities and exact cell means of h_*.
inline double fiber_grid_tolerance(const GridFunction& hstar, const FiberField& exact, int K = default_weak_cutoff) {
  const GridFunction cells = exact.cell_averages(hstar.nx, hstar.nt);
  GridFunction diff(hstar.nx, hstar.nt);
  for (std::size_t k = 0; k < diff.size(); ++k) diff.values[k] = hstar.values[k] - cells.values[k];
  return weak_norm(diff, K);
}

// ---------------------------------------------------------------------------
// Averaged dynamics

struct AveragedZero {
  double theta = 0.0;
  double derivative = 0.0;
  bool stable = false;
  double basin_lo = 0.0, basin_hi = 0.0;  // basin [lo, hi) on the lift, stable zeros only
};

struct AveragedField {
  std::vector<double> theta, values;
  std::vector<AveragedZero> zeros;
  double basin_total = 0.0;
  std::function<double(double)> eval;

  /// index of the stable zero whose basin contains theta, or -1
  int basin_of(double t) const {
    for (std::size_t z = 0; z < zeros.size(); ++z) {
      if (!zeros[z].stable) continue;
      const double lo = zeros[z].basin_lo, hi = zeros[z].basin_hi;
      const double s = lo + wrap01(t - lo);
      if (s >= lo && s < hi) return static_cast<int>(z);
    }
    return -1;
  }
};

/// omega_bar(theta) = int omega(x, theta) h_*(x, theta) dx in closed form from
/// the Fourier moments of h_*, its zeros, stability and basins.
inline AveragedField averaged_field(const MapSpec& map, const FiberField& hstar, int n_theta = 1024) {
  if (n_theta < 8) throw ConfigError("averaged_field: need at least 8 theta samples");
  AveragedField out;
  const TrigPoly2 omega = map.omega;
  out.eval = [omega, hstar](double t) {
    double s = 0.0;
    for (const auto& term : omega.terms()) {
      const auto [cm, sm] = hstar.moments(std::abs(term.k), t);
      const double sk = term.k < 0 ? -sm : sm;  // int sin(2 pi k x) h for negative k
      const double c = std::cos(two_pi * term.l * t), sn = std::sin(two_pi * term.l * t);
      // cos(2pi(kx + l t)) = cos(2pi kx) cos(2pi l t) - sin(2pi kx) sin(2pi l t)
      s += term.a * (cm * c - sk * sn);
      s += term.b * (sk * c + cm * sn);
    }
    return s;
  };
  for (int j = 0; j < n_theta; ++j) {
    out.theta.push_back(static_cast<double>(j) / n_theta);
    out.values.push_back(out.eval(out.theta.back()));
  }
  auto deriv = [&](double t) { return (out.eval(t + 1e-6) - out.eval(t - 1e-6)) / 2e-6; };
  for (int j = 0; j < n_theta; ++j) {
    double a = out.theta[j], b = a + 1.0 / n_theta;
    double fa = out.values[j], fb = out.values[(j + 1) % n_theta];
    if (fa == 0.0) {
      fb = fa;
      b = a;
    } else if (fa * fb > 0.0 || fb == 0.0) {
      continue;
    }
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
      const double m = 0.5 * (a + b), fm = out.eval(m);
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    AveragedZero z;
    z.theta = wrap01(0.5 * (a + b));
    z.derivative = deriv(z.theta);
    if (std::abs(z.derivative) < 1e-6)
      throw DegenerateZero("averaged field has a degenerate zero at theta = " + std::to_string(z.theta));
    z.stable = z.derivative < 0.0;
    out.zeros.push_back(z);
  }
  // basin of a stable zero: up to the neighbouring zeros on the circle
  const std::size_t nz = out.zeros.size();
  for (std::size_t z = 0; z < nz; ++z) {
    if (!out.zeros[z].stable) continue;
    const double prev = out.zeros[(z + nz - 1) % nz].theta, next = out.zeros[(z + 1) % nz].theta;
    const double t = out.zeros[z].theta;
    out.zeros[z].basin_lo = nz == 1 ? t - 0.5 : t - wrap01(t - prev);
    out.zeros[z].basin_hi = nz == 1 ? t + 0.5 : t + wrap01(next - t);
    out.basin_total += out.zeros[z].basin_hi - out.zeros[z].basin_lo;
  }
  return out;
}

struct HatPReport {
  GridFunction projected;
  double error = 0.0;
  std::vector<double> basin_mass;  // per stable zero
};

/// P^ h: the mass of h over each basin collapsed onto the theta row of the
/// stable zero, with fiber profile h_*(., theta_j).
inline HatPReport hat_p_projection(const GridFunction& h, const AveragedField& avg, const GridFunction& hstar,
                                   int K = default_weak_cutoff) {
  if (h.nx != hstar.nx || h.nt != hstar.nt) throw ConfigError("hat_p_projection: grid mismatch");
  HatPReport r;
  r.projected = GridFunction(h.nx, h.nt);
  r.basin_mass.assign(avg.zeros.size(), 0.0);
  const std::vector<double> beta = h.theta_marginal();
  for (std::size_t j = 0; j < h.nt; ++j) {
    const int z = avg.basin_of(h.theta(j));
    if (z < 0) throw DegenerateZero("theta row outside every basin");
    r.basin_mass[z] += beta[j] / h.nt;
  }
  for (std::size_t z = 0; z < avg.zeros.size(); ++z) {
    if (!avg.zeros[z].stable) continue;
    const std::size_t row = std::min(h.nt - 1, static_cast<std::size_t>(wrap01(avg.zeros[z].theta) * h.nt));
    for (std::size_t i = 0; i < h.nx; ++i)
      r.projected.at(i, row) += hstar.at(i, row) * r.basin_mass[z] * h.nt;
  }
  GridFunction g(h.nx, h.nt);
  for (std::size_t k = 0; k < g.size(); ++k) g.values[k] = h.values[k] - r.projected.values[k];
  r.error = weak_norm(g, K);
  return r;
}

/// Mass of a density within |theta - centre| <= radius (on the circle).
inline double theta_window_mass(const GridFunction& h, double centre, double radius) {
  const std::vector<double> beta = h.theta_marginal();
  double m = 0.0;
  for (std::size_t j = 0; j < h.nt; ++j)
    if (std::abs(centered_mod1(h.theta(j) - centre)) <= radius) m += beta[j] / h.nt;
  return m;
}

// ---------------------------------------------------------------------------
// Correlations

struct CorrelationOptions {
  std::uint64_t steps = 20000000;
  int seeds = 16;
  int burn_in = 1000;
  std::uint64_t seed = 99;
  double floor_sigmas = 3.0;  // resolvable while |C(n)| exceeds this many standard errors
};

struct CorrelationTable {
  std::vector<double> C;          // orbit estimate
  std::vector<double> stderr_;    // standard error across seeds
  std::vector<double> C_ulam;     // Ulam cross-check, empty when not requested
  int resolvable = 0;             // C(0..resolvable-1) above the noise floor
  double rate = 0.0;              // fitted nu in |C(n)| ~ C e^{-nu n}
  double r_squared = 0.0;
  double noise_floor = 0.0;       // median standard error
};

/// C(n) = int phi (psi o F^n) h - (int phi h)(int psi h) by orbit averaging.
inline CorrelationTable correlation_decay(const MapSpec& map, const TrigPoly2& phi, const TrigPoly2& psi, int n_max,
                                          const CorrelationOptions& opt = {}) {
  if (n_max < 1) throw ConfigError("correlation_decay: n_max must be >= 1");
  const std::uint64_t per = opt.steps / opt.seeds;
  if (per <= static_cast<std::uint64_t>(n_max) + 1) throw ConfigError("correlation_decay: orbit too short");
  std::vector<std::vector<double>> per_seed(opt.seeds, std::vector<double>(n_max + 1));
  parallel_for(opt.seeds, [&](std::size_t s) {
    std::mt19937_64 rng(opt.seed + 104729 * s);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Point2 p{u(rng), u(rng)};
    for (int b = 0; b < opt.burn_in; ++b) p = eval(map, p);
    std::vector<double> a(per), c(per);
    for (std::uint64_t t = 0; t < per; ++t) {
      a[t] = phi(p.x, p.theta);
      c[t] = psi(p.x, p.theta);
      p = eval(map, p);
    }
    for (int n = 0; n <= n_max; ++n) {
      const std::uint64_t T = per - n;
      double sa = 0.0, sc = 0.0, sac = 0.0;
      for (std::uint64_t t = 0; t < T; ++t) {
        sa += a[t];
        sc += c[t + n];
        sac += a[t] * c[t + n];
      }
      per_seed[s][n] = sac / T - (sa / T) * (sc / T);
    }
  });
  CorrelationTable out;
  out.C.assign(n_max + 1, 0.0);
  out.stderr_.assign(n_max + 1, 0.0);
  for (int n = 0; n <= n_max; ++n) {
    double m = 0.0;
    for (int s = 0; s < opt.seeds; ++s) m += per_seed[s][n];
    m /= opt.seeds;
    double v = 0.0;
    for (int s = 0; s < opt.seeds; ++s) v += (per_seed[s][n] - m) * (per_seed[s][n] - m);
    out.C[n] = m;
    out.stderr_[n] = opt.seeds > 1 ? std::sqrt(v / (opt.seeds - 1) / opt.seeds) : 0.0;
  }
  std::vector<double> se(out.stderr_);
  std::nth_element(se.begin(), se.begin() + se.size() / 2, se.end());
  out.noise_floor = se[se.size() / 2];
  while (out.resolvable <= n_max &&
         std::abs(out.C[out.resolvable]) > opt.floor_sigmas * std::max(out.stderr_[out.resolvable], 1e-300))
    ++out.resolvable;
  if (out.resolvable >= 3) {
    const int m = out.resolvable;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (int n = 0; n < m; ++n) {
      const double y = std::log(std::abs(out.C[n]));
      sx += n;
      sy += y;
      sxx += double(n) * n;
      sxy += n * y;
      syy += y * y;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / m;
    double ss_res = 0.0, ss_tot = 0.0;
    for (int n = 0; n < m; ++n) {
      const double y = std::log(std::abs(out.C[n]));
      ss_res += (y - icpt - slope * n) * (y - icpt - slope * n);
      ss_tot += (y - sy / m) * (y - sy / m);
    }
    out.rate = -slope;
    out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return out;
}

/// Ulam cross-check: C(n) = <psi, P^n (phi h)> - <phi h, 1><psi h, 1>, cell sums.
inline std::vector<double> correlation_ulam(const DiscreteOperator& op, const GridFunction& h, const TrigPoly2& phi,
                                            const TrigPoly2& psi, int n_max) {
  const std::size_t N = op.dimension();
  Eigen::VectorXd v(N), w(N);
  double mphi = 0.0, mpsi = 0.0;
  for (std::size_t j = 0; j < op.nt; ++j)
    for (std::size_t i = 0; i < op.nx; ++i) {
      const std::size_t k = j * op.nx + i;
      const double m = h.values[k] * h.cell_area();
      v(k) = phi(h.x(i), h.theta(j)) * m;
      w(k) = psi(h.x(i), h.theta(j));
      mphi += v(k);
      mpsi += w(k) * m;
    }
  std::vector<double> out;
  for (int n = 0; n <= n_max; ++n) {
    out.push_back(w.dot(v) - mphi * mpsi);
    v = op.ulam * v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// x-constant test

struct PeriodicOrbit {
  std::vector<int> word;
  std::vector<double> points;
  double average = 0.0;
};

struct XConstantReport {
  bool consistent = true;  // all orbit averages agree
  double spread = 0.0;     // max - min of orbit averages
  std::vector<PeriodicOrbit> orbits;
  std::optional<std::pair<PeriodicOrbit, PeriodicOrbit>> witness;
};

namespace detail {

inline bool is_primitive(const std::vector<int>& w) {
  const std::size_t p = w.size();
  for (std::size_t q = 1; q < p; ++q) {
    if (p % q) continue;
    bool rep = true;
    for (std::size_t i = 0; i < p && rep; ++i) rep = w[i] == w[i % q];
    if (rep) return false;
  }
  return true;
}

inline bool is_min_rotation(const std::vector<int>& w) {
  const std::size_t p = w.size();
  for (std::size_t r = 1; r < p; ++r)
    for (std::size_t i = 0; i < p; ++i) {
      const int a = w[(i + r) % p], b = w[i];
      if (a < b) return false;
      if (a > b) break;
    }
  return true;
}

}  // namespace detail

/// Periodic orbits of x -> f(x, theta) up to period_max via the inverse-branch
/// fixed point of each primitive word, and the orbit averages of omega(., theta).
inline XConstantReport x_constant_test(const MapSpec& map, double theta, int period_max, double tol = 1e-8) {
  if (period_max < 1 || period_max > 12) throw ConfigError("x_constant_test: period must lie in [1, 12]");
  const int d = map.degree;
  const double amp = map.f_pert.amplitude_bound();
  XConstantReport r;
  auto same_orbit = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (double x : a) {
      bool hit = false;
      for (double y : b) hit = hit || std::abs(centered_mod1(x - y)) < 1e-10;
      if (!hit) return false;
    }
    return true;
  };
  for (int p = 1; p <= period_max; ++p) {
    std::vector<int> w(p, 0);
    while (true) {
      if (detail::is_primitive(w) && detail::is_min_rotation(w)) {
        // x = g_{w0}(g_{w1}(... g_{w_{p-1}}(x))) with g_k the inverse branch onto the lap k
        double x = 0.5;
        for (int it = 0; it < 400; ++it) {
          double y = x;
          for (int s = p - 1; s >= 0; --s) y = wrap01(detail::solve_fiber(map, theta, y + w[s], amp));
          const double step = std::abs(centered_mod1(y - x));
          x = y;
          if (step < 1e-15) break;
        }
        PeriodicOrbit o;
        o.word = w;
        double y = x, sum = 0.0;
        for (int s = 0; s < p; ++s) {
          o.points.push_back(y);
          sum += map.omega(y, theta);
          y = wrap01(d * y + map.f_pert(y, theta));
        }
        o.average = sum / p;
        bool dup = false;
        for (const auto& q : r.orbits) dup = dup || same_orbit(q.points, o.points);
        if (!dup) r.orbits.push_back(std::move(o));
      }
      int i = p - 1;
      while (i >= 0 && w[i] == d - 1) w[i--] = 0;
      if (i < 0) break;
      ++w[i];
    }
  }
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 1; i < r.orbits.size(); ++i) {
    if (r.orbits[i].average < r.orbits[lo].average) lo = i;
    if (r.orbits[i].average > r.orbits[hi].average) hi = i;
  }
  r.spread = r.orbits[hi].average - r.orbits[lo].average;
  r.consistent = r.spread <= tol;
  if (!r.consistent) r.witness = std::make_pair(r.orbits[hi], r.orbits[lo]);
  return r;
}

// ---------------------------------------------------------------------------
// H^1 norm

/// sqrt(sum over frequencies of (1 + |xi|^2) |h^(xi)|^2).
inline double eigenfunction_h1(const GridFunction& h) {
  const GridSpectrum s(h);
  const int nx = static_cast<int>(h.nx), nt = static_cast<int>(h.nt);
  double acc = 0.0;
  for (int j = 0; j < nt; ++j)
    for (int i = 0; i < nx; ++i) {
      const int k = i <= nx / 2 ? i : i - nx, l = j <= nt / 2 ? j : j - nt;
      acc += (1.0 + double(k) * k + double(l) * l) * std::norm(s.at(k, l));
    }
  return std::sqrt(acc);
}

/// Least-squares exponent of y against x on log-log axes.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace svph
