#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/FFT>

#include "svph/branches.hpp"
#include "svph/cones.hpp"
#include "svph/curves.hpp"
#include "svph/errors.hpp"
#include "svph/fiber.hpp"
#include "svph/fourier.hpp"
#include "svph/grid.hpp"
#include "svph/map.hpp"
#include "svph/parallel.hpp"

namespace svph {

// ---------------------------------------------------------------------------
// Pointwise branch sums

/// L^n u (p) = sum over q in F^{-n}(p) of u(q) / |det D_q F^n|.
template <typename U>
double apply_transfer(const MapSpec& map, U&& u, const Point2& p, int n) {
  if (n < 0 || n > 12) throw ConfigError("apply_transfer: n must lie in [0, 12]");
  const PreimageTree tree(map, p, n);
  double s = 0.0;
  for (const auto& q : tree.level(n)) s += u(q.point) / std::abs(q.det);
  return s;
}

/// Piecewise-constant reading of a grid function, the function Ulam acts on.
inline double grid_lookup(const GridFunction& g, const Point2& p) {
  const Point2 w = p.wrapped();
  const std::size_t i = std::min(g.nx - 1, static_cast<std::size_t>(w.x * g.nx));
  const std::size_t j = std::min(g.nt - 1, static_cast<std::size_t>(w.theta * g.nt));
  return g.at(i, j);
}

/// L^n u sampled at the cell centres of an nx x nt grid.
template <typename U>
GridFunction transfer_on_grid(const MapSpec& map, U&& u, std::size_t nx, std::size_t nt, int n) {
  GridFunction out(nx, nt);
  parallel_for(nt, [&](std::size_t j) {
    for (std::size_t i = 0; i < nx; ++i) out.at(i, j) = apply_transfer(map, u, {out.x(i), out.theta(j)}, n);
  });
  return out;
}

struct TransferSupReport {
  int n = 0;
  double value = 0.0;     // grid sup of L^n 1
  Point2 point;
  double mu_shape = 0.0;  // C_{mu,n} mu^n, the shape of the a priori bound
};

/// Grid sup of L^n 1 for every depth 1..n_max, from one tree per point.
inline std::vector<TransferSupReport> sup_L_n_1_profile(const MapSpec& map, int n_max, int grid, double mu = 1.0) {
  if (n_max < 1 || n_max > 10) throw ConfigError("sup_L_n_1: n must lie in [1, 10]");
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(grid) * grid);
  parallel_for(vals.size(), [&](std::size_t k) {
    const Point2 p{(k % grid + 0.5) / grid, (k / grid + 0.5) / grid};
    const PreimageTree tree(map, p, n_max);
    vals[k].resize(n_max + 1);
    for (int n = 1; n <= n_max; ++n) {
      double s = 0.0;
      for (const auto& q : tree.level(n)) s += 1.0 / std::abs(q.det);
      vals[k][n] = s;
    }
  });
  std::vector<TransferSupReport> out;
  for (int n = 1; n <= n_max; ++n) {
    TransferSupReport r;
    r.n = n;
    for (std::size_t k = 0; k < vals.size(); ++k)
      if (vals[k][n] > r.value) {
        r.value = vals[k][n];
        r.point = {(k % grid + 0.5) / grid, (k / grid + 0.5) / grid};
      }
    r.mu_shape = C_mu_n(mu, n) * std::pow(mu, n);
    out.push_back(r);
  }
  return out;
}

inline TransferSupReport sup_L_n_1(const MapSpec& map, int n, int grid, double mu = 1.0) {
  return sup_L_n_1_profile(map, n, grid, mu).back();
}

// ---------------------------------------------------------------------------
// Shadowing

struct ShadowingPoint {
  int n = 0;
  double ratio = 0.0;  // grid sup of (1/h_*) L^n h_*
  double log_ratio = 0.0;
  Point2 point;
  bool beyond_horizon = false;  // n > 0.5 eps^{-1/2}
};

/// sup over the grid of (1/h_*) L^n h_* for n = 1..n_max.
inline std::vector<ShadowingPoint> shadowing_profile(const MapSpec& map, const FiberField& h, int n_max, int grid) {
  if (n_max < 1 || n_max > 10) throw ConfigError("shadowing: n must lie in [1, 10]");
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(grid) * grid);
  parallel_for(vals.size(), [&](std::size_t k) {
    const Point2 p{(k % grid + 0.5) / grid, (k / grid + 0.5) / grid};
    const PreimageTree tree(map, p, n_max);
    const double h0 = h(p);
    vals[k].resize(n_max + 1);
    for (int n = 1; n <= n_max; ++n) {
      double s = 0.0;
      for (const auto& q : tree.level(n)) s += h(q.point) / std::abs(q.det);
      vals[k][n] = s / h0;
    }
  });
  std::vector<ShadowingPoint> out;
  const double horizon = map.epsilon > 0.0 ? 0.5 / std::sqrt(map.epsilon) : std::numeric_limits<double>::infinity();
  for (int n = 1; n <= n_max; ++n) {
    ShadowingPoint r;
    r.n = n;
    for (std::size_t k = 0; k < vals.size(); ++k)
      if (vals[k][n] > r.ratio) {
        r.ratio = vals[k][n];
        r.point = {(k % grid + 0.5) / grid, (k / grid + 0.5) / grid};
      }
    r.log_ratio = std::log(r.ratio);
    r.beyond_horizon = n > horizon;
    out.push_back(r);
  }
  return out;
}

struct ShadowingSample {
  double epsilon = 0.0;
  int n = 0;
  double log_ratio = 0.0;
};

struct ShadowingFit {
  double c_star = 0.0;    // smallest c with log ratio <= c n^2 eps at every sample
  double c_fit = 0.0;     // least-squares slope of log ratio against n^2 eps
  double residual = 0.0;  // relative rms residual of the least-squares fit
};

inline ShadowingFit fit_shadowing(const std::vector<ShadowingSample>& samples) {
  ShadowingFit f;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& s : samples) {
    const double x = s.n * s.n * s.epsilon;
    if (x <= 0.0) continue;
    f.c_star = std::max(f.c_star, s.log_ratio / x);
    sxy += x * s.log_ratio;
    sxx += x * x;
    syy += s.log_ratio * s.log_ratio;
  }
  if (sxx > 0.0) f.c_fit = sxy / sxx;
  double rss = 0.0;
  for (const auto& s : samples) {
    const double x = s.n * s.n * s.epsilon;
    rss += (s.log_ratio - f.c_fit * x) * (s.log_ratio - f.c_fit * x);
  }
  f.residual = syy > 0.0 ? std::sqrt(rss / syy) : 0.0;
  return f;
}

/// Grid sup of (1/h_*) L^n h_* and the bound constant log ratio / (n^2 eps).
inline ShadowingPoint shadowing_ratio(const MapSpec& map, int n, int grid) {
  const FiberField h(map);
  return shadowing_profile(map, h, n, grid).back();
}

// ---------------------------------------------------------------------------
// Discrete operators

enum class OperatorKind { ulam, fourier };

struct DiscreteOperator {
  OperatorKind kind = OperatorKind::ulam;
  std::size_t nx = 0, nt = 0;  // Ulam grid
  int K = 0;                   // Fourier cutoff per axis
  int quadrature = 0;          // Fourier quadrature points per axis
  Eigen::SparseMatrix<double> ulam;  // column j: image distribution of cell j
  Eigen::MatrixXcd fourier;          // entry (xi, eta) = <e_xi, L e_eta>
  double raw_defect = 0.0;           // largest column-sum defect before renormalization

  std::size_t dimension() const {
    return kind == OperatorKind::ulam ? nx * nt : static_cast<std::size_t>((2 * K + 1) * (2 * K + 1));
  }

  std::size_t fourier_index(int k, int l) const {
    return static_cast<std::size_t>((l + K) * (2 * K + 1) + (k + K));
  }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    if (kind == OperatorKind::ulam) return ulam.cast<cplx>() * v;
    return fourier * v;
  }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    if (kind != OperatorKind::ulam) throw ConfigError("real action is only defined for Ulam operators");
    return ulam * v;
  }

  /// Ulam action on a density sampled on the operator's grid.
  GridFunction apply(const GridFunction& g) const {
    if (kind != OperatorKind::ulam || g.nx != nx || g.nt != nt) throw ConfigError("grid does not match the operator");
    const Eigen::Map<const Eigen::VectorXd> in(g.values.data(), g.values.size());
    GridFunction out(nx, nt);
    Eigen::Map<Eigen::VectorXd>(out.values.data(), out.values.size()) = ulam * in;
    return out;
  }

  /// Sparse triplet CSV: row,col,value (real and imaginary parts for Fourier).
  void write_triplets(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f.precision(17);
    if (kind == OperatorKind::ulam) {
      f << "row,col,value\n";
      for (int c = 0; c < ulam.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(ulam, c); it; ++it)
          f << it.row() << ',' << it.col() << ',' << it.value() << '\n';
    } else {
      f << "row,col,re,im\n";
      for (Eigen::Index r = 0; r < fourier.rows(); ++r)
        for (Eigen::Index c = 0; c < fourier.cols(); ++c)
          if (std::abs(fourier(r, c)) > 0.0) f << r << ',' << c << ',' << fourier(r, c).real() << ',' << fourier(r, c).imag() << '\n';
    }
  }
};

/// Ulam matrix on an nx x nt grid: the share of cell j whose image lies in
/// cell i, from sx * sy stratified samples per cell.
inline DiscreteOperator ulam_matrix(const MapSpec& map, std::size_t nx, std::size_t nt, int sx = 8, int sy = 4) {
  if (nx == 0 || nt == 0 || nx * nt > (std::size_t{1} << 20)) throw ConfigError("ulam_matrix: need 0 < nx*nt <= 2^20");
  if (sx < 1 || sy < 1) throw ConfigError("ulam_matrix: sample counts must be positive");
  DiscreteOperator op;
  op.kind = OperatorKind::ulam;
  op.nx = nx;
  op.nt = nt;
  const double w = 1.0 / (sx * sy);
  std::vector<std::vector<Eigen::Triplet<double>>> rows(nt);
  std::vector<double> defect(nt, 0.0);
  parallel_for(nt, [&](std::size_t j) {
    std::vector<std::pair<std::size_t, int>> hits;
    for (std::size_t i = 0; i < nx; ++i) {
      hits.clear();
      for (int b = 0; b < sy; ++b)
        for (int a = 0; a < sx; ++a) {
          const Point2 p{(i + (a + 0.5) / sx) / nx, (j + (b + 0.5) / sy) / nt};
          const Point2 q = eval(map, p);
          const std::size_t ti = std::min(nx - 1, static_cast<std::size_t>(q.x * nx));
          const std::size_t tj = std::min(nt - 1, static_cast<std::size_t>(q.theta * nt));
          hits.push_back({tj * nx + ti, 1});
        }
      std::sort(hits.begin(), hits.end());
      const std::size_t col = j * nx + i;
      double sum = 0.0;
      for (std::size_t k = 0; k < hits.size();) {
        std::size_t e = k;
        int c = 0;
        while (e < hits.size() && hits[e].first == hits[k].first) c += hits[e++].second;
        rows[j].emplace_back(static_cast<int>(hits[k].first), static_cast<int>(col), c * w);
        sum += c * w;
        k = e;
      }
      defect[j] = std::max(defect[j], std::abs(sum - 1.0));
    }
  });
  std::vector<Eigen::Triplet<double>> all;
  for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  op.ulam.resize(static_cast<Eigen::Index>(nx * nt), static_cast<Eigen::Index>(nx * nt));
  op.ulam.setFromTriplets(all.begin(), all.end());
  op.ulam.makeCompressed();
  op.raw_defect = *std::max_element(defect.begin(), defect.end());
  // exact column sums: divide each column by its sum
  for (int c = 0; c < op.ulam.outerSize(); ++c) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.ulam, c); it; ++it) s += it.value();
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.ulam, c); it; ++it) it.valueRef() /= s;
  }
  return op;
}

/// Smallest quadrature resolution per axis accepted for a Fourier matrix.
inline int fourier_quadrature_floor(const MapSpec& map, int K) { return 8 * (map.degree * K + map.max_frequency()); }

/// Galerkin matrix <e_xi, L e_eta> for |xi|, |eta| <= K (sup norm), by the
/// duality F(Lu)(xi) = int e^{-2 pi i <F(z), xi>} u(z) dz on an M x M grid.
inline DiscreteOperator fourier_matrix(const MapSpec& map, int K, int M = 0) {
  if (K < 0 || K > 32) throw ConfigError("fourier_matrix: K must lie in [0, 32]");
  const int floor = fourier_quadrature_floor(map, K);
  if (M == 0) M = floor;
  if (M < floor)
    throw QuadratureUnderResolved("quadrature " + std::to_string(M) + " below " + std::to_string(floor) +
                                  " = 8 (d K + K_pert)");
  DiscreteOperator op;
  op.kind = OperatorKind::fourier;
  op.K = K;
  op.quadrature = M;
  const int D = 2 * K + 1;
  op.fourier = Eigen::MatrixXcd::Zero(D * D, D * D);
  // lifted image coordinates at the quadrature nodes j/M
  std::vector<double> F1(static_cast<std::size_t>(M) * M), F2(F1.size());
  for (int b = 0; b < M; ++b)
    for (int a = 0; a < M; ++a) {
      const Point2 q = eval_lift(map, {static_cast<double>(a) / M, static_cast<double>(b) / M});
      F1[b * M + a] = q.x - std::floor(q.x);
      F2[b * M + a] = q.theta - std::floor(q.theta);
    }
  parallel_for(static_cast<std::size_t>(D) * D, [&](std::size_t xi_idx) {
    const int k = static_cast<int>(xi_idx % D) - K, l = static_cast<int>(xi_idx / D) - K;
    Eigen::FFT<double> fft;
    std::vector<cplx> row(M), out, col(M), colout;
    std::vector<cplx> partial(static_cast<std::size_t>(M) * D);
    for (int b = 0; b < M; ++b) {
      for (int a = 0; a < M; ++a) {
        const double ph = -two_pi * (k * F1[b * M + a] + l * F2[b * M + a]);
        row[a] = cplx(std::cos(ph), std::sin(ph));
      }
      fft.inv(out, row);  // (1/M) sum_a row[a] e^{+2 pi i eta a / M}
      for (int e = -K; e <= K; ++e) partial[b * D + (e + K)] = out[(e + M) % M];
    }
    for (int e1 = 0; e1 < D; ++e1) {
      for (int b = 0; b < M; ++b) col[b] = partial[b * D + e1];
      fft.inv(colout, col);
      for (int e2 = -K; e2 <= K; ++e2) op.fourier(xi_idx, (e2 + K) * D + e1) = colout[(e2 + M) % M];
    }
  });
  return op;
}

}  // namespace svph
