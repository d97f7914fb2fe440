#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <random>

#include "svph/map_io.hpp"
#include "svph/transfer.hpp"

using namespace svph;

namespace {

double smooth_u(const Point2& p) {
  return 1.0 + 0.5 * std::cos(two_pi * p.x) + 0.3 * std::sin(two_pi * p.theta) + 0.2 * std::cos(two_pi * (p.x + p.theta));
}

// Normalized histogram of a long orbit of the fiber map x -> 3x + 0.1 sin(2 pi x).
std::vector<double> fiber_orbit_histogram(std::size_t bins, long steps, int seeds) {
  std::vector<double> h(bins, 0.0);
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(100 + s);
    double x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (int k = 0; k < 1000; ++k) x = std::fmod(3.0 * x + 0.1 * std::sin(two_pi * x) + 1.0, 1.0);
    for (long k = 0; k < steps; ++k) {
      x = std::fmod(3.0 * x + 0.1 * std::sin(two_pi * x) + 1.0, 1.0);
      h[std::min(bins - 1, static_cast<std::size_t>(x * bins))] += 1.0;
    }
  }
  const double total = static_cast<double>(steps) * seeds;
  for (auto& v : h) v *= bins / total;
  return h;
}

// Means over c x c blocks of a square grid function.
GridFunction blocks(const GridFunction& g, std::size_t c) {
  GridFunction out(c, c);
  const std::size_t f = g.nx / c;
  for (std::size_t j = 0; j < g.nt; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) out.at(i / f, j / f) += g.at(i, j) / static_cast<double>(f * f);
  return out;
}

// <e_xi, L e_eta> by direct double-sum quadrature of the duality integral.
cplx fourier_entry(const MapSpec& m, int k, int l, int a, int b, int M) {
  cplx s = 0.0;
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < M; ++i) {
      const Point2 z{static_cast<double>(i) / M, static_cast<double>(j) / M};
      const Point2 q = eval(m, z);
      const double ph = -two_pi * (k * q.x + l * q.theta) + two_pi * (a * z.x + b * z.theta);
      s += cplx(std::cos(ph), std::sin(ph));
    }
  return s / static_cast<double>(M * M);
}

}  // namespace

TEST(FiberDensity, DoublingIsLebesgue) {
  const GridFunction h = fiber_h_star(examples::E0(), 0.3, 64);
  for (double v : h.values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(FiberDensity, MatchesOrbitHistogram) {
  const MapSpec m = examples::E1(0.05);
  const std::size_t nx = 4096;
  const FiberUlamResult r = fiber_ulam(m, 0.0, nx);
  EXPECT_LE(r.residual, 1e-10);
  EXPECT_NEAR(r.density.integral(), 1.0, 1e-12);
  EXPECT_GT(r.density.min(), 0.0);
  const auto hist = fiber_orbit_histogram(nx, 25'000'000, 4);
  double l1 = 0.0;
  for (std::size_t i = 0; i < nx; ++i) l1 += std::abs(hist[i] - r.density.values[i]) / nx;
  EXPECT_LE(l1, 0.01);
}

TEST(FiberDensity, FixedPointIdentity) {
  const MapSpec m = examples::E1(0.05);
  const FiberDensity h = FiberDensity::solve(m, 0.0);
  for (int i = 0; i < 1000; ++i) EXPECT_NEAR(fiber_identity(m, h, (i + 0.5) / 1000.0), 1.0, 1e-8);
  EXPECT_NEAR(fiber_identity(m, h, 0.123, 3), 1.0, 1e-8);
}

TEST(FiberDensity, CollocationAgreesWithUlam) {
  const MapSpec m = examples::E1(0.05);
  const FiberDensity h = FiberDensity::solve(m, 0.0);
  const GridFunction u = fiber_h_star(m, 0.0, 512);
  double err = 0.0;
  for (std::size_t i = 0; i < 512; ++i) err = std::max(err, std::abs(h.cell_average(u.x(i), 1.0 / 512) - u.values[i]));
  EXPECT_LT(err, 2e-4);
}

TEST(ApplyTransfer, DoublingPreservesOne) {
  const MapSpec m = examples::E0();
  auto one = [](const Point2&) { return 1.0; };
  for (int n = 0; n <= 6; ++n) EXPECT_NEAR(apply_transfer(m, one, {0.37, 0.81}, n), 1.0, 1e-14);
  EXPECT_THROW(apply_transfer(m, one, {0.1, 0.1}, 13), ConfigError);
}

TEST(ApplyTransfer, ConservesIntegral) {
  const MapSpec m = examples::E1(0.05);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const double a = u(rng), b = u(rng), c = u(rng);
    auto f = [&](const Point2& p) {
      return 2.0 + a * std::cos(two_pi * p.x) + b * std::sin(two_pi * (p.x - p.theta)) + c * std::cos(4 * std::numbers::pi * p.theta);
    };
    const GridFunction Lf = transfer_on_grid(m, f, 256, 256, 1);
    EXPECT_NEAR(Lf.integral(), 2.0, 1e-6);
  }
  const GridFunction L2 = transfer_on_grid(m, smooth_u, 256, 256, 2);
  EXPECT_NEAR(L2.integral(), 1.0, 1e-6);
}

TEST(ApplyTransfer, PositivityAndContraction) {
  const MapSpec m = examples::E1(0.05);
  auto signed_u = [](const Point2& p) { return std::sin(two_pi * p.x) + 0.4 * std::cos(two_pi * p.theta); };
  auto abs_u = [&](const Point2& p) { return std::abs(signed_u(p)); };
  const GridFunction L = transfer_on_grid(m, signed_u, 128, 128, 2);
  const GridFunction La = transfer_on_grid(m, abs_u, 128, 128, 2);
  EXPECT_GE(La.min(), 0.0);
  const GridFunction U = GridFunction::sample(128, 128, [&](double x, double t) { return signed_u({x, t}); });
  EXPECT_LE(L.l1(), U.l1() + 1e-4);
}

TEST(SupTransfer, DoublingIsOne) {
  for (const auto& r : sup_L_n_1_profile(examples::E0(), 6, 4)) EXPECT_NEAR(r.value, 1.0, 1e-14);
}

TEST(SupTransfer, FiberEnumerationAtZeroEps) {
  // at eps = 0 the branch sum is the 1D sum over fiber preimages
  const MapSpec m = examples::E1(0.0);
  const int n = 4, grid = 8;
  double oracle = 0.0;
  for (int k = 0; k < grid * grid; ++k) {
    const double x = (k % grid + 0.5) / grid;
    // 1D preimages by bisection on the increasing lift 3y + 0.1 sin(2 pi y)
    std::vector<std::pair<double, double>> level{{x, 1.0}}, next;
    for (int s = 0; s < n; ++s) {
      next.clear();
      for (auto [z, w] : level)
        for (int j = 0; j < 3; ++j) {
          double lo = 0.0, hi = 1.0;
          for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (3 * mid + 0.1 * std::sin(two_pi * mid) < z + j ? lo : hi) = mid;
          }
          const double y = 0.5 * (lo + hi);
          next.emplace_back(y, w / (3 + 0.2 * std::numbers::pi * std::cos(two_pi * y)));
        }
      level.swap(next);
    }
    double s = 0.0;
    for (auto [y, w] : level) s += w;
    oracle = std::max(oracle, s);
  }
  EXPECT_NEAR(sup_L_n_1(m, n, grid).value, oracle, 1e-10);
}

TEST(SupTransfer, Submultiplicative) {
  const auto prof = sup_L_n_1_profile(examples::E1(0.05), 6, 16);
  for (int n = 1; n <= 3; ++n)
    for (int k = 1; n + k <= 6; ++k) EXPECT_LE(prof[n + k - 1].value, prof[n - 1].value * prof[k - 1].value * 1.02);
}

TEST(Shadowing, DoublingRatioIsOne) {
  for (int n = 1; n <= 4; ++n) EXPECT_NEAR(shadowing_ratio(examples::E0(), n, 4).ratio, 1.0, 1e-12);
}

TEST(Shadowing, ZeroEpsilonIsFiberInvariant) {
  const MapSpec m = examples::E1(0.0);
  const FiberField h(m);
  for (const auto& r : shadowing_profile(m, h, 4, 6)) EXPECT_NEAR(r.ratio, 1.0, 1e-9);
}

TEST(Shadowing, GrowsWithDepth) {
  const MapSpec m = examples::E1(0.01);
  const FiberField h(m);
  const auto prof = shadowing_profile(m, h, 8, 6);
  for (std::size_t k = 1; k < prof.size(); ++k) EXPECT_GE(prof[k].log_ratio, prof[k - 1].log_ratio - 1e-12);
  EXPECT_FALSE(prof[3].beyond_horizon);
  EXPECT_TRUE(prof[7].beyond_horizon == (8 > 5.0));
}

TEST(Shadowing, FitRecoversExactQuadratic) {
  std::vector<ShadowingSample> s;
  for (double e : {0.01, 0.02})
    for (int n : {2, 4, 6}) s.push_back({e, n, 1.5 * n * n * e});
  const ShadowingFit f = fit_shadowing(s);
  EXPECT_NEAR(f.c_fit, 1.5, 1e-12);
  EXPECT_NEAR(f.c_star, 1.5, 1e-12);
  EXPECT_NEAR(f.residual, 0.0, 1e-12);
}

TEST(Ulam, ColumnStochastic) {
  const DiscreteOperator op = ulam_matrix(examples::E1(0.05), 32, 32);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(op.ulam.cols());
  for (int c = 0; c < op.ulam.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.ulam, c); it; ++it) {
      EXPECT_GE(it.value(), 0.0);
      sums[c] += it.value();
    }
  EXPECT_LT((sums.array() - 1.0).abs().maxCoeff(), 1e-12);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(op.ulam.cols());
  EXPECT_NEAR((Eigen::RowVectorXd::Ones(op.ulam.rows()) * op.apply(one))(0), static_cast<double>(one.size()), 1e-9);
}

TEST(Ulam, DoublingIsNilpotentOffConstant) {
  const std::size_t nx = 16;
  const DiscreteOperator op = ulam_matrix(examples::E0(), nx, 1);
  const Eigen::MatrixXd M(op.ulam);
  // exact doubling Ulam matrix: cell j sends half its mass to cells 2j and 2j+1 mod nx
  Eigen::MatrixXd exact = Eigen::MatrixXd::Zero(nx, nx);
  for (std::size_t j = 0; j < nx; ++j) {
    exact((2 * j) % nx, j) += 0.5;
    exact((2 * j + 1) % nx, j) += 0.5;
  }
  EXPECT_LT((M - exact).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(nx, nx);
  for (int k = 0; k < 4; ++k) P = M * P;
  EXPECT_LT((P.array() - 1.0 / nx).abs().maxCoeff(), 1e-15);
  const Eigen::VectorXcd ev = M.eigenvalues();
  int unit = 0;
  for (const auto& z : ev) unit += std::abs(z) > 0.5;
  EXPECT_EQ(unit, 1);
}

TEST(Ulam, DoublingTensorIdentityInTheta) {
  const DiscreteOperator op = ulam_matrix(examples::E0(), 8, 4);
  const Eigen::MatrixXd M(op.ulam);
  for (std::size_t c = 0; c < 32; ++c)
    for (std::size_t r = 0; r < 32; ++r)
      if (r / 8 != c / 8) EXPECT_EQ(M(r, c), 0.0);
}

TEST(Ulam, L1ContractionOnSignedVectors) {
  const DiscreteOperator op = ulam_matrix(examples::E1(0.05), 32, 32);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd v(op.dimension());
    for (auto& x : v) x = g(rng);
    EXPECT_LE(op.apply(v).lpNorm<1>(), v.lpNorm<1>() + 1e-9);
  }
}

TEST(Ulam, ConsistentWithBranchSum) {
  // sampled Ulam carries O(1) per-cell noise, so compare 8 x 8 block means;
  // the block error shrinks at least like 1/N
  const MapSpec m = examples::E1(0.05);
  std::vector<double> err;
  for (std::size_t N : {16, 64, 256}) {
    const DiscreteOperator op = ulam_matrix(m, N, N);
    const GridFunction u = GridFunction::sample(N, N, [](double x, double t) { return smooth_u({x, t}); });
    const GridFunction Lu = transfer_on_grid(m, smooth_u, N, N, 1);
    err.push_back(l1_distance(blocks(op.apply(u), 8), blocks(Lu, 8)));
  }
  const double slope = std::log(err.back() / err.front()) / std::log(16.0);
  EXPECT_LT(slope, -0.9);
}

TEST(Ulam, FourStepsMatchBranchSum) {
  const MapSpec m = examples::E1(0.05);
  const GridFunction L4 = blocks(transfer_on_grid(m, smooth_u, 32, 32, 4), 8);
  std::vector<double> err;
  for (std::size_t N : {32, 256}) {
    const DiscreteOperator op = ulam_matrix(m, N, N);
    GridFunction u = GridFunction::sample(N, N, [](double x, double t) { return smooth_u({x, t}); });
    for (int k = 0; k < 4; ++k) u = op.apply(u);
    err.push_back(l1_distance(blocks(u, 8), L4));
  }
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[1], 0.015);
}

TEST(Ulam, TripletsRoundTrip) {
  const DiscreteOperator op = ulam_matrix(examples::E0(), 4, 2);
  const auto path = std::filesystem::temp_directory_path() / "svph_triplets.csv";
  op.write_triplets(path.string());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "row,col,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, op.ulam.nonZeros());
  std::filesystem::remove(path);
}

TEST(Ulam, RejectsOversizedGrid) { EXPECT_THROW(ulam_matrix(examples::E0(), 2048, 1024), ConfigError); }

TEST(Fourier, DoublingSelectsFrequencies) {
  const int K = 4;
  const DiscreteOperator op = fourier_matrix(examples::E0(), K);
  for (int k = -K; k <= K; ++k)
    for (int l = -K; l <= K; ++l)
      for (int a = -K; a <= K; ++a)
        for (int b = -K; b <= K; ++b) {
          const double want = (a == 2 * k && b == l) ? 1.0 : 0.0;
          EXPECT_NEAR(std::abs(op.fourier(op.fourier_index(k, l), op.fourier_index(a, b)) - want), 0.0, 1e-12);
        }
}

TEST(Fourier, ZeroRowIsIntegral) {
  const int K = 3;
  const DiscreteOperator op = fourier_matrix(examples::E1(0.05), K);
  const std::size_t r0 = op.fourier_index(0, 0);
  for (std::size_t c = 0; c < op.dimension(); ++c)
    EXPECT_NEAR(std::abs(op.fourier(r0, c) - cplx(c == r0 ? 1.0 : 0.0)), 0.0, 1e-10);
}

TEST(Fourier, EntriesMatchDirectQuadrature) {
  const MapSpec m = examples::E1(0.05);
  const int K = 2;
  const DiscreteOperator op = fourier_matrix(m, K);
  const std::vector<std::array<int, 4>> picks{{1, 0, 2, 0}, {1, 1, 2, 1}, {-1, 2, 0, 2}, {2, -1, 1, 0}, {0, 1, 0, 1}};
  for (const auto& [k, l, a, b] : picks)
    EXPECT_NEAR(std::abs(op.fourier(op.fourier_index(k, l), op.fourier_index(a, b)) - fourier_entry(m, k, l, a, b, op.quadrature)),
                0.0, 1e-12);
}

TEST(Fourier, LeadingEigenvalueIsOne) {
  const DiscreteOperator op = fourier_matrix(examples::E1(0.05), 4);
  const Eigen::VectorXcd ev = op.fourier.eigenvalues();
  double top = 0.0;
  cplx lead;
  for (const auto& z : ev)
    if (std::abs(z) > top) {
      top = std::abs(z);
      lead = z;
    }
  EXPECT_NEAR(std::abs(lead - cplx(1.0)), 0.0, 1e-8);
}

TEST(Fourier, UnderResolvedQuadratureThrows) {
  const MapSpec m = examples::E1(0.05);
  EXPECT_THROW(fourier_matrix(m, 4, fourier_quadrature_floor(m, 4) - 1), QuadratureUnderResolved);
  EXPECT_THROW(fourier_matrix(m, 33), ConfigError);
}
