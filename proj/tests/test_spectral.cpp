#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "svph/map_io.hpp"
#include "svph/spectral.hpp"

using namespace svph;

namespace {

MapSpec x_free_omega() {
  MapSpec m;
  m.degree = 3;
  m.f_pert.add_sin(1, 0, 0.1);
  m.omega.add_sin(0, 1, -1.0);
  m.epsilon = 0.05;
  return m;
}

// Doubling map with a given omega.
MapSpec doubling_with(TrigPoly2 omega) {
  MapSpec m;
  m.degree = 2;
  m.omega = std::move(omega);
  m.epsilon = 0.05;
  return m;
}

// Cyclic permutation of three cells as an Ulam-kind operator.
DiscreteOperator three_cycle() {
  DiscreteOperator op;
  op.kind = OperatorKind::ulam;
  op.nx = 3;
  op.nt = 1;
  op.ulam.resize(3, 3);
  std::vector<Eigen::Triplet<double>> t{{1, 0, 1.0}, {2, 1, 1.0}, {0, 2, 1.0}};
  op.ulam.setFromTriplets(t.begin(), t.end());
  return op;
}

TrigPoly2 constant(double c) {
  TrigPoly2 p;
  p.add_cos(0, 0, c);
  return p;
}

TrigPoly2 mode(bool cosine, int k, int l) {
  TrigPoly2 p;
  cosine ? p.add_cos(k, l, 1.0) : p.add_sin(k, l, 1.0);
  return p;
}

}  // namespace

TEST(WeakNorm, SingleMode) {
  const GridFunction g = GridFunction::sample(64, 64, [](double x, double t) { return std::cos(two_pi * (3 * x + 4 * t)); });
  EXPECT_NEAR(weak_norm(g), 0.5 / (1.0 + two_pi * 5.0), 1e-13);
  EXPECT_NEAR(weak_norm(GridFunction(16, 16, 0.0)), 0.0, 0.0);
  EXPECT_NEAR(weak_norm(GridFunction(16, 16, 2.0)), 2.0, 1e-14);
}

TEST(Factorization, SyntheticProductPlusMode) {
  // sin(2 pi x) sin(2 pi theta) has four coefficients of modulus 1/4 at |xi| = sqrt 2
  const MapSpec m = examples::E1(0.05);
  const std::size_t N = 64;
  const GridFunction hs = fiber_h_star_grid(m, N, N);
  const double delta = 0.03;
  GridFunction h(N, N);
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t i = 0; i < N; ++i)
      h.at(i, j) = hs.at(i, j) * (1.0 + 0.5 * std::cos(two_pi * h.theta(j))) +
                   delta * std::sin(two_pi * h.x(i)) * std::sin(two_pi * h.theta(j));
  const FactorizationReport r = factorization_error(h, hs);
  EXPECT_NEAR(r.error, delta / 4.0 / (1.0 + two_pi * std::sqrt(2.0)), 1e-12);
  EXPECT_THROW(factorization_error(h, fiber_h_star_grid(m, 32, 32)), ConfigError);
}

TEST(Factorization, ExactAtZeroEpsilon) {
  // cell means of h_*(x, theta) beta(theta) factor up to the grid tolerance
  const MapSpec m = examples::E1(0.0);
  const std::size_t N = 64;
  const FiberField exact(m);
  const GridFunction cells = exact.cell_averages(N, N);
  GridFunction h(N, N);
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t i = 0; i < N; ++i) h.at(i, j) = cells.at(i, j) * (1.0 + 0.7 * std::sin(two_pi * h.theta(j)));
  const GridFunction hs = fiber_h_star_grid(m, N, N);
  EXPECT_LE(factorization_error(h, hs).error, 2.0 * fiber_grid_tolerance(hs, exact));
}

TEST(AveragedField, XIndependentOmega) {
  const MapSpec m = x_free_omega();
  const AveragedField a = averaged_field(m, FiberField(m));
  for (double t : {0.0, 0.1, 0.37, 0.8}) EXPECT_NEAR(a.eval(t), -std::sin(two_pi * t), 1e-12);
  ASSERT_EQ(a.zeros.size(), 2u);
  std::vector<double> th{a.zeros[0].theta, a.zeros[1].theta};
  std::sort(th.begin(), th.end());
  EXPECT_NEAR(th[0], 0.0, 1e-12);
  EXPECT_NEAR(th[1], 0.5, 1e-12);
  for (const auto& z : a.zeros) {
    const bool at_zero = std::abs(centered_mod1(z.theta)) < 1e-9;
    EXPECT_EQ(z.stable, at_zero);
    if (at_zero) EXPECT_NEAR(z.derivative, -two_pi, 1e-6);
  }
  EXPECT_NEAR(a.basin_total, 1.0, 1e-8);
}

TEST(AveragedField, E1MatchesQuadrature) {
  const MapSpec m = examples::E1(0.05);
  const AveragedField a = averaged_field(m, FiberField(m));
  // moment of the fiber density by a fine midpoint sum over exact Ulam cells
  const GridFunction h = fiber_h_star(m, 0.0, 8192);
  double m1 = 0.0;
  for (std::size_t i = 0; i < h.nx; ++i) m1 += std::cos(two_pi * h.x(i)) * h.values[i] / h.nx;
  for (double t : {0.0, 0.2, 0.5, 0.75}) EXPECT_NEAR(a.eval(t), -std::sin(two_pi * t) + 0.3 * m1, 1e-5);
  int stable = 0;
  for (const auto& z : a.zeros)
    if (z.stable) {
      ++stable;
      EXPECT_LT(std::abs(centered_mod1(z.theta)), 0.01);
    }
  EXPECT_EQ(stable, 1);
  EXPECT_NEAR(a.basin_total, 1.0, 1e-8);
}

TEST(HatP, PreservesMassAndFixesConcentrated) {
  const MapSpec m = examples::E1(0.05);
  const std::size_t N = 32;
  const AveragedField a = averaged_field(m, FiberField(m));
  const GridFunction hs = fiber_h_star_grid(m, N, N);
  const GridFunction srb = ulam_fixed_density(ulam_matrix(m, N, N)).density;
  const HatPReport r = hat_p_projection(srb, a, hs);
  EXPECT_NEAR(r.projected.integral(), srb.integral(), 1e-10);
  // a density already on the stable row is its own projection
  std::size_t row = 0;
  for (const auto& z : a.zeros)
    if (z.stable) row = std::min(N - 1, static_cast<std::size_t>(wrap01(z.theta) * N));
  GridFunction conc(N, N);
  for (std::size_t i = 0; i < N; ++i) conc.at(i, row) = hs.at(i, row) * N;
  EXPECT_NEAR(hat_p_projection(conc, a, hs).error, 0.0, 1e-12);
}

TEST(ThetaWindow, CountsRowsOnTheCircle) {
  const GridFunction h(10, 10, 1.0);
  EXPECT_NEAR(theta_window_mass(h, 0.0, 0.11), 0.2, 1e-12);
  EXPECT_NEAR(theta_window_mass(h, 0.5, 1.0), 1.0, 1e-12);
}

TEST(Spectrum, StochasticLeadingEigenvalueIsOne) {
  const DiscreteOperator op = ulam_matrix(examples::E1(0.05), 16, 16);
  const SpectralReport r = peripheral_spectrum(op, 4);
  EXPECT_NEAR(std::abs(r.pairs.values[0] - cplx(1.0)), 0.0, 1e-10);
  EXPECT_EQ(r.peripheral, std::vector<int>{0});
  EXPECT_TRUE(r.roots_of_unity);
}

TEST(Spectrum, IterativeAgreesWithDense) {
  const DiscreteOperator op = ulam_matrix(examples::E1(0.05), 24, 24);
  const Eigen::VectorXcd ev = Eigen::MatrixXd(op.ulam).eigenvalues();
  std::vector<double> mods;
  for (const auto& z : ev) mods.push_back(std::abs(z));
  std::sort(mods.rbegin(), mods.rend());
  EigenOptions opt;
  opt.dense_limit = 100;
  const Eigenpairs p = top_eigenpairs(op, 3, opt);
  EXPECT_FALSE(p.dense);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(p.values[i]), mods[i], 1e-6);
}

TEST(Spectrum, DoublingHasFiberContinuum) {
  const SpectralReport r = peripheral_spectrum(ulam_matrix(examples::E0(), 8, 4), 6);
  EXPECT_EQ(r.peripheral.size(), 4u);
  for (int i : r.peripheral) EXPECT_NEAR(std::abs(r.pairs.values[i] - cplx(1.0)), 0.0, 1e-10);
}

TEST(Spectrum, CyclicPeripheralGroup) {
  const SpectralReport r = peripheral_spectrum(three_cycle(), 3, {}, 0.05, 300);
  ASSERT_EQ(r.peripheral.size(), 3u);
  EXPECT_TRUE(r.roots_of_unity);
  for (int q : r.root_orders) EXPECT_TRUE(q == 1 || q == 3);
  EXPECT_LT(r.cesaro_discrepancy, 1e-10);
}

TEST(Spectrum, CesaroDiscrepancyShrinksWithTerms) {
  const DiscreteOperator op = ulam_matrix(examples::E1(0.05), 16, 16);
  const double d100 = peripheral_spectrum(op, 3, {}, 0.05, 100).cesaro_discrepancy;
  const double d400 = peripheral_spectrum(op, 3, {}, 0.05, 400).cesaro_discrepancy;
  EXPECT_LT(d400, 0.3 * d100);
}

TEST(Srb, UlamDensityIsFixedProbability) {
  SrbOptions opt;
  opt.nx = opt.nt = 48;
  opt.method = SrbMethod::ulam;
  const SrbResult r = srb_density(examples::E1(0.05), opt);
  ASSERT_TRUE(r.ulam);
  EXPECT_NEAR(r.ulam->integral(), 1.0, 1e-10);
  EXPECT_GE(r.ulam->min(), -1e-9);
  EXPECT_LE(r.ulam_residual, 1e-8);
  const GridFunction again = ulam_matrix(examples::E1(0.05), 48, 48).apply(*r.ulam);
  EXPECT_LE(l1_distance(again, *r.ulam), 1e-8);
  EXPECT_FALSE(r.non_unique);
  EXPECT_FALSE(r.degenerate_fibers);
}

TEST(Srb, DegenerateFibersFlagged) {
  SrbOptions opt;
  opt.nx = opt.nt = 8;
  opt.method = SrbMethod::ulam;
  const SrbResult r = srb_density(examples::E0(), opt);
  EXPECT_TRUE(r.degenerate_fibers);
  EXPECT_TRUE(r.non_unique);
}

TEST(Srb, OrbitRouteAgreesCoarsely) {
  SrbOptions opt;
  opt.nx = opt.nt = 16;
  opt.orbit.steps = 4'000'000;
  opt.orbit.seeds = 8;
  const SrbResult r = srb_density(examples::E1(0.05), opt);
  ASSERT_TRUE(r.orbit);
  EXPECT_NEAR(r.orbit->integral(), 1.0, 1e-10);
  EXPECT_LT(r.l1_between, 0.1);
}

TEST(Correlations, ConstantObservableVanishes) {
  CorrelationOptions opt;
  opt.steps = 400'000;
  opt.seeds = 4;
  const CorrelationTable t = correlation_decay(examples::E1(0.05), constant(2.0), mode(false, 0, 1), 5, opt);
  for (double c : t.C) EXPECT_NEAR(c, 0.0, 1e-12);
  EXPECT_EQ(t.resolvable, 0);
}

TEST(Correlations, DoublingCosineIsWhite) {
  // floating-point doubling orbits collapse onto 0, so the Ulam route is used
  const std::size_t N = 256;
  const DiscreteOperator op = ulam_matrix(examples::E0(), N, 1);
  const GridFunction h(N, 1, 1.0);
  const auto C = correlation_ulam(op, h, mode(true, 1, 0), mode(true, 1, 0), 4);
  EXPECT_NEAR(C[0], 0.5, 1e-12);
  for (int n = 1; n <= 4; ++n) EXPECT_NEAR(C[n], 0.0, 1e-3);
}

TEST(Correlations, E1DecaysExponentially) {
  CorrelationOptions opt;
  opt.steps = 4'000'000;
  opt.seeds = 8;
  const CorrelationTable t = correlation_decay(examples::E1(0.05), mode(false, 0, 1), mode(false, 0, 1), 20, opt);
  EXPECT_GE(t.resolvable, 5);
  EXPECT_GT(t.rate, 0.0);
  EXPECT_GE(t.r_squared, 0.9);
  EXPECT_THROW(correlation_decay(examples::E1(0.05), constant(1.0), constant(1.0), 0, opt), ConfigError);
}

TEST(XConstant, CoboundaryIsConsistent) {
  const XConstantReport r = x_constant_test(examples::E2(0.05), 0.3, 6);
  EXPECT_TRUE(r.consistent);
  EXPECT_LT(r.spread, 1e-8);
  for (const auto& o : r.orbits) EXPECT_NEAR(o.average, 0.0, 1e-8);
}

TEST(XConstant, CosineOnDoublingClosedForm) {
  const XConstantReport r = x_constant_test(doubling_with(mode(true, 1, 0)), 0.4, 2);
  EXPECT_FALSE(r.consistent);
  ASSERT_EQ(r.orbits.size(), 2u);
  std::vector<double> avgs{r.orbits[0].average, r.orbits[1].average};
  std::sort(avgs.begin(), avgs.end());
  EXPECT_NEAR(avgs[0], -0.5, 1e-12);
  EXPECT_NEAR(avgs[1], 1.0, 1e-12);
  ASSERT_TRUE(r.witness);
  EXPECT_NEAR(r.witness->first.average - r.witness->second.average, 1.5, 1e-12);
}

TEST(XConstant, OrbitCountMatchesNecklaces) {
  // the doubling map has 2^p - 1 points of period dividing p, so by Moebius
  // inversion 1, 1, 2, 3, 6, 9 primitive orbits of periods 1..6
  const XConstantReport r = x_constant_test(doubling_with(mode(true, 1, 0)), 0.0, 6);
  EXPECT_EQ(r.orbits.size(), 22u);
}

TEST(XConstant, E1IsNotXConstant) {
  const XConstantReport r = x_constant_test(examples::E1(0.05), 0.2, 4);
  EXPECT_FALSE(r.consistent);
  EXPECT_TRUE(r.witness.has_value());
}

TEST(H1, ConstantIsOne) { EXPECT_NEAR(eigenfunction_h1(GridFunction(32, 32, 1.0)), 1.0, 1e-12); }

TEST(H1, BumpScalesLikeQuarterPower) {
  // unit-height bump: the derivative term dominates once sqrt(eps) << 1
  std::vector<double> eps{4e-4, 2e-4, 1e-4}, h1;
  for (double e : eps) {
    const GridFunction g = GridFunction::sample(16, 1024, [&](double, double t) {
      double s = 0.0;
      for (int w = -2; w <= 2; ++w) s += std::exp(-(t - 0.5 + w) * (t - 0.5 + w) / (2.0 * e));
      return s;
    });
    h1.push_back(eigenfunction_h1(g));
  }
  EXPECT_NEAR(loglog_slope(eps, h1), -0.25, 0.02);
}

TEST(H1, LogLogSlopeOfPowerLaw) {
  EXPECT_NEAR(loglog_slope({1.0, 2.0, 4.0}, {3.0, 3.0 / std::sqrt(2.0), 1.5}), -0.5, 1e-12);
}
