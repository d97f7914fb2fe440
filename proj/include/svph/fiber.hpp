#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "svph/branches.hpp"
#include "svph/errors.hpp"
#include "svph/grid.hpp"
#include "svph/map.hpp"

namespace svph {

namespace detail {

/// Interpolating kernel of odd order n on the uniform nodes j/n.
inline double dirichlet(double t, int n) {
  const double s = std::sin(std::numbers::pi * t);
  if (std::abs(s) < 1e-14) {
    // t is an integer: the kernel equals +-1 with the parity of n*t, which is 1 for odd n
    return 1.0;
  }
  return std::sin(n * std::numbers::pi * t) / (n * s);
}

}  // namespace detail

inline constexpr int fiber_max_iterations = 10000;

/// Density of the absolutely continuous invariant measure of x -> f(x, theta),
/// stored as a real trigonometric polynomial.
///
/// Solved by collocation: the transfer operator of the fiber map is applied to
/// the trigonometric interpolant on n odd nodes and iterated to its fixed
/// point. The resolution is doubled until the upper half of the spectrum is
/// negligible, so the fixed-point identity holds pointwise to near machine
/// precision for analytic fibers.
class FiberDensity {
 public:
  FiberDensity() = default;

  static FiberDensity solve(const MapSpec& map, double theta, int nodes = 0) {
    if (map.f_pert.is_zero()) {
      FiberDensity h;
      h.a_ = {1.0};
      h.b_ = {0.0};
      h.theta_ = theta;
      h.nodes_ = 1;
      return h;
    }
    if (nodes > 0) return solve_fixed(map, theta, nodes | 1);
    FiberDensity h;
    for (int n = 33; n <= 4097; n = 2 * n - 1) {
      h = solve_fixed(map, theta, n);
      if (h.tail_ratio() < 1e-14) return h;
    }
    return h;
  }

  double operator()(double x) const {
    double s = a_[0];
    for (std::size_t k = 1; k < a_.size(); ++k) {
      const double w = two_pi * k * x;
      s += a_[k] * std::cos(w) + b_[k] * std::sin(w);
    }
    return s;
  }

  double derivative(double x) const {
    double s = 0.0;
    for (std::size_t k = 1; k < a_.size(); ++k) {
      const double w = two_pi * k * x;
      s += two_pi * k * (-a_[k] * std::sin(w) + b_[k] * std::cos(w));
    }
    return s;
  }

  /// Mean of h over [x - w/2, x + w/2].
  double cell_average(double x, double w) const {
    double s = a_[0];
    for (std::size_t k = 1; k < a_.size(); ++k) {
      const double t = std::numbers::pi * k * w;
      const double damp = std::sin(t) / t;
      const double ph = two_pi * k * x;
      s += damp * (a_[k] * std::cos(ph) + b_[k] * std::sin(ph));
    }
    return s;
  }

  /// integral of h against cos(2 pi k x) and sin(2 pi k x)
  double cos_moment(int k) const { return k == 0 ? a_[0] : (k < static_cast<int>(a_.size()) ? 0.5 * a_[k] : 0.0); }
  double sin_moment(int k) const { return k > 0 && k < static_cast<int>(b_.size()) ? 0.5 * b_[k] : 0.0; }

  int nodes() const { return nodes_; }
  double theta() const { return theta_; }
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

  GridFunction sample(std::size_t nx) const {
    return GridFunction::sample(nx, 1, [&](double x, double) { return (*this)(x); });
  }

 private:
  static FiberDensity solve_fixed(const MapSpec& map, double theta, int n) {
    const int d = map.degree;
    const double amp = map.f_pert.amplitude_bound();
    // A(i, j) = sum over preimages y of x_i of D(y - x_j) / f'(y)
    std::vector<double> A(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
      const double xi = static_cast<double>(i) / n;
      for (int k = 0; k < d; ++k) {
        const double y = detail::solve_fiber(map, theta, xi + k, amp);
        const double fp = d + map.f_pert.jet(y, theta).dx;
        for (int j = 0; j < n; ++j) A[i * n + j] += detail::dirichlet(y - static_cast<double>(j) / n, n) / fp;
      }
    }
    std::vector<double> h(n, 1.0), next(n);
    FiberDensity out;
    out.theta_ = theta;
    out.nodes_ = n;
    for (int it = 1; it <= fiber_max_iterations; ++it) {
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += A[i * n + j] * h[j];
        next[i] = s;
      }
      double mean = 0.0;
      for (double v : next) mean += v;
      mean /= n;
      double res = 0.0;
      for (int i = 0; i < n; ++i) {
        next[i] /= mean;
        res += std::abs(next[i] - h[i]);
      }
      res /= n;
      h.swap(next);
      out.iterations_ = it;
      out.residual_ = res;
      if (res <= 1e-15) break;
    }
    if (!(out.residual_ <= 1e-10))
      throw NoConvergence("fiber density did not converge, residual " + std::to_string(out.residual_));
    out.set_from_nodes(h);
    return out;
  }

  void set_from_nodes(const std::vector<double>& h) {
    const int n = static_cast<int>(h.size());
    const int K = (n - 1) / 2;
    a_.assign(K + 1, 0.0);
    b_.assign(K + 1, 0.0);
    for (int k = 0; k <= K; ++k) {
      double c = 0.0, s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double w = two_pi * k * j / n;
        c += h[j] * std::cos(w);
        s += h[j] * std::sin(w);
      }
      a_[k] = (k == 0 ? 1.0 : 2.0) * c / n;
      b_[k] = (k == 0 ? 0.0 : 2.0) * s / n;
    }
  }

  double tail_ratio() const {
    double tail = 0.0;
    for (std::size_t k = a_.size() / 2; k < a_.size(); ++k) tail = std::max(tail, std::hypot(a_[k], b_[k]));
    return tail / std::abs(a_[0]);
  }

  std::vector<double> a_{1.0}, b_{0.0};
  double theta_ = 0.0;
  int nodes_ = 1;
  double residual_ = 0.0;
  int iterations_ = 0;
};

/// h_*(x, theta) on the whole torus: one fiber density when f does not depend
/// on theta, otherwise densities on an odd theta grid joined by trigonometric
/// interpolation.
class FiberField {
 public:
  explicit FiberField(const MapSpec& map, int theta_nodes = 33) {
    if (!map.f_pert.depends_on_theta()) {
      fibers_.push_back(FiberDensity::solve(map, 0.0));
      return;
    }
    const int n = theta_nodes | 1;
    for (int j = 0; j < n; ++j) fibers_.push_back(FiberDensity::solve(map, static_cast<double>(j) / n));
  }

  double operator()(double x, double theta) const {
    if (fibers_.size() == 1) return fibers_[0](x);
    const int n = static_cast<int>(fibers_.size());
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += fibers_[j](x) * detail::dirichlet(theta - static_cast<double>(j) / n, n);
    return s;
  }
  double operator()(const Point2& p) const { return (*this)(p.x, p.theta); }

  /// Mean over an x-cell of width w, taken at the fiber theta.
  double cell_average(double x, double w, double theta) const {
    if (fibers_.size() == 1) return fibers_[0].cell_average(x, w);
    const int n = static_cast<int>(fibers_.size());
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += fibers_[j].cell_average(x, w) * detail::dirichlet(theta - static_cast<double>(j) / n, n);
    return s;
  }

  /// Cell means in x on an nx x nt grid, fibers read at the cell-centre theta.
  GridFunction cell_averages(std::size_t nx, std::size_t nt) const {
    return GridFunction::sample(nx, nt, [&](double x, double t) { return cell_average(x, 1.0 / nx, t); });
  }

  /// Moments int h(x, theta) cos(2 pi k x) dx and int h(x, theta) sin(2 pi k x) dx.
  std::pair<double, double> moments(int k, double theta) const {
    if (fibers_.size() == 1) return {fibers_[0].cos_moment(k), fibers_[0].sin_moment(k)};
    const int n = static_cast<int>(fibers_.size());
    double c = 0.0, s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double w = detail::dirichlet(theta - static_cast<double>(j) / n, n);
      c += fibers_[j].cos_moment(k) * w;
      s += fibers_[j].sin_moment(k) * w;
    }
    return {c, s};
  }

  bool theta_independent() const { return fibers_.size() == 1; }
  const std::vector<FiberDensity>& fibers() const { return fibers_; }

  GridFunction sample(std::size_t nx, std::size_t nt) const {
    return GridFunction::sample(nx, nt, [&](double x, double t) { return (*this)(x, t); });
  }

 private:
  std::vector<FiberDensity> fibers_;
};

struct FiberUlamResult {
  GridFunction density;   // nx x 1, integral one
  double residual = 0.0;  // L1 norm of P h - h
  int iterations = 0;
};

/// Fixed density of the 1D Ulam operator of x -> f(x, theta) on nx cells.
/// samples == 0 uses exact transition weights from the preimages of the cell
/// boundaries; samples > 0 uses that many equispaced points per cell.
inline FiberUlamResult fiber_ulam(const MapSpec& map, double theta, std::size_t nx, int samples = 0) {
  if (nx == 0 || samples < 0) throw ConfigError("fiber_ulam: need nx > 0 and samples >= 0");
  struct Move {
    std::size_t from, to;
    double w;
  };
  std::vector<Move> moves;
  const double N = static_cast<double>(nx);
  if (samples == 0) {
    // preimages y_c of the lifted boundaries c / nx cut [0, 1) into pieces,
    // each mapped into one target cell and lying in at most two source cells
    const double amp = map.f_pert.amplitude_bound();
    const double F0 = map.f_pert(0.0, theta);
    const auto c0 = static_cast<long>(std::floor(F0 * N));
    const auto c1 = c0 + static_cast<long>(map.degree * nx) + 1;
    std::vector<double> y;
    for (long c = c0; c <= c1; ++c) y.push_back(std::clamp(detail::solve_fiber(map, theta, c / N, amp), 0.0, 1.0));
    for (std::size_t k = 0; k + 1 < y.size(); ++k) {
      const auto to = static_cast<std::size_t>(((c0 + static_cast<long>(k)) % static_cast<long>(nx) + nx) % nx);
      double a = y[k];
      const double b = y[k + 1];
      while (b > a) {
        const std::size_t from = std::min(nx - 1, static_cast<std::size_t>(a * N));
        const double e = std::min(b, (from + 1) / N);
        moves.push_back({from, to, (e - a) * N});
        if (e <= a) break;
        a = e;
      }
    }
  } else {
    const double w = 1.0 / samples;
    for (std::size_t i = 0; i < nx; ++i)
      for (int a = 0; a < samples; ++a) {
        const double y = wrap01(map.degree * ((i + (a + 0.5) / samples) / N) + map.f_pert((i + (a + 0.5) / samples) / N, theta));
        moves.push_back({i, std::min(nx - 1, static_cast<std::size_t>(y * N)), w});
      }
  }
  FiberUlamResult out;
  std::vector<double> h(nx, 1.0), next(nx);
  for (int it = 1; it <= fiber_max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const Move& m : moves) next[m.to] += h[m.from] * m.w;
    double res = 0.0;
    for (std::size_t i = 0; i < nx; ++i) res += std::abs(next[i] - h[i]);
    res /= N;
    h.swap(next);
    out.iterations = it;
    out.residual = res;
    if (res <= 1e-13) break;
  }
  if (!(out.residual <= 1e-10))
    throw NoConvergence("fiber Ulam density did not converge, residual " + std::to_string(out.residual));
  out.density = GridFunction(nx, 1);
  out.density.values = h;
  out.density.normalize();
  return out;
}

/// h_* of the fiber map at theta on nx cells, by the 1D Ulam method.
inline GridFunction fiber_h_star(const MapSpec& map, double theta, std::size_t nx) {
  return fiber_ulam(map, theta, nx).density;
}

/// Fiber densities h_*(., theta_j) by the 1D Ulam method, one per theta row of
/// an nx x nt grid; rows are copies when f does not depend on theta. The
/// default sample count matches the x-stratification of ulam_matrix.
inline GridFunction fiber_h_star_grid(const MapSpec& map, std::size_t nx, std::size_t nt, int samples = 8) {
  GridFunction g(nx, nt);
  GridFunction row;
  for (std::size_t j = 0; j < nt; ++j) {
    if (j == 0 || map.f_pert.depends_on_theta()) row = fiber_ulam(map, g.theta(j), nx, samples).density;
    for (std::size_t i = 0; i < nx; ++i) g.at(i, j) = row.values[i];
  }
  return g;
}

/// (1/h(x)) sum over fiber preimages y of h(y) / (f^n)'(y), the fixed-point
/// identity of the fiber transfer operator.
inline double fiber_identity(const MapSpec& map, const FiberDensity& h, double x, int n = 1) {
  const double amp = map.f_pert.amplitude_bound();
  const double theta = h.theta();
  std::vector<std::pair<double, double>> level{{x, 1.0}}, next;
  for (int s = 0; s < n; ++s) {
    next.clear();
    for (const auto& [z, w] : level)
      for (int k = 0; k < map.degree; ++k) {
        const double y = detail::solve_fiber(map, theta, z + k, amp);
        next.emplace_back(y, w / (map.degree + map.f_pert.jet(y, theta).dx));
      }
    level.swap(next);
  }
  double s = 0.0;
  for (const auto& [y, w] : level) s += h(y) * w;
  return s / h(x);
}

}  // namespace svph
