#include <gtest/gtest.h>

#include <random>

#include "svph/map_io.hpp"
#include "svph/transversality.hpp"

using namespace svph;

namespace {

// Oracle image cone: slopes of J (1, s) for densely sampled |s| <= chi.
std::pair<double, double> sampled_cone(const Mat2& J, double chi) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int k = 0; k <= 4000; ++k) {
    const double s = -chi + 2.0 * chi * k / 4000.0;
    const double v = (J[1][0] + J[1][1] * s) / (J[0][0] + J[0][1] * s);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

struct Branch {
  Point2 z;
  double lo, hi, w;
};

// Preimages and their cones from the plain preimage list and products of
// one-step Jacobians along the forward orbit.
std::vector<Branch> oracle_branches(const MapSpec& m, double chi, const Point2& y, int n) {
  std::vector<Branch> out;
  for (const auto& q : preimages(m, y, n)) {
    Mat2 J = identity2();
    Point2 z = q.point;
    for (int k = 0; k < n; ++k) {
      J = mat_mul(jacobian(m, z), J);
      z = eval(m, z);
    }
    const auto [lo, hi] = sampled_cone(J, chi);
    out.push_back({q.point, lo, hi, 1.0 / std::abs(mat_det(J))});
  }
  return out;
}

double oracle_N(const std::vector<Branch>& b) {
  double best = 0.0;
  for (const auto& a : b) {
    double s = 0.0;
    for (const auto& c : b)
      if (std::max(a.lo, c.lo) <= std::min(a.hi, c.hi) + 1e-9) s += c.w;
    best = std::max(best, s);
  }
  return best;
}

double oracle_Ntilde(const std::vector<Branch>& b) {
  // the coverage maximum is attained at some lower endpoint
  double best = 0.0;
  for (const auto& a : b) {
    double s = 0.0;
    for (const auto& c : b)
      if (c.lo <= a.lo + 1e-12 && a.lo <= c.hi + 1e-12) s += c.w;
    best = std::max(best, s);
  }
  return best;
}

ConeSetup e1_setup() { return cone_parameters(examples::E1(0.05), supported_regularity, 256); }

}  // namespace

TEST(ImageCone, MatchesSampledSlopes) {
  const MapSpec m = examples::E1(0.05);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Mat2 J = jacobian_n(m, {u(rng), u(rng)}, 3);
    const SlopeInterval s = image_cone(J, 0.2);
    const auto [lo, hi] = sampled_cone(J, 0.2);
    EXPECT_NEAR(s.lo, lo, 1e-12);
    EXPECT_NEAR(s.hi, hi, 1e-12);
  }
}

TEST(ImageCone, VerticalDirectionThrows) {
  const Mat2 J{{{1.0, 2.0}, {0.0, 1.0}}};
  EXPECT_THROW(image_cone(J, 1.0), DegenerateDirection);
}

TEST(Transversality, E0ExactlyOne) {
  const MapSpec m = examples::E0();
  ConeParams c;
  c.chi_u = 0.5;
  for (int n = 1; n <= 6; ++n)
    for (const Point2 y : {Point2{0.1, 0.2}, Point2{0.77, 0.4}}) {
      EXPECT_NEAR(n_count(m, c, y, n).value, 1.0, 1e-12);
      EXPECT_NEAR(n_tilde_sup_line(m, c, y, n).value, 1.0, 1e-12);
      EXPECT_NEAR(n_tilde(m, c, y, ProjectiveLine::horizontal(), n), 1.0, 1e-12);
    }
}

TEST(Transversality, PairwiseAgreesWithOracle) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  const Point2 y{0.375, 0.625};
  const auto br = oracle_branches(m, c.shrunk_chi_u(), y, 3);
  int transversal = 0;
  for (const auto& a : br)
    for (const auto& b : br) {
      const bool oracle = std::max(a.lo, b.lo) > std::min(a.hi, b.hi);
      const bool got = is_transversal(m, c, a.z, b.z, 3);
      EXPECT_EQ(got, oracle);
      EXPECT_EQ(got, is_transversal(m, c, b.z, a.z, 3));
      transversal += got;
    }
  EXPECT_GT(transversal, 0);
}

TEST(Transversality, DifferentFibersThrow) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  EXPECT_THROW(is_transversal(m, c, {0.1, 0.1}, {0.3, 0.5}, 2), NotSameFiber);
}

TEST(Transversality, CountsAgreeWithOracle) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    const Point2 y{u(rng), u(rng)};
    for (int n = 1; n <= 4; ++n) {
      const auto br = oracle_branches(m, c.shrunk_chi_u(), y, n);
      EXPECT_NEAR(n_count(m, c, y, n).value, oracle_N(br), 1e-9) << "n=" << n;
      EXPECT_NEAR(n_tilde_sup_line(m, c, y, n).value, oracle_Ntilde(br), 1e-9) << "n=" << n;
    }
  }
}

TEST(Transversality, NtildeAtMostN) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  for (int n = 1; n <= 5; ++n) {
    const Point2 y{0.3, 0.6};
    EXPECT_LE(n_tilde_sup_line(m, c, y, n).value, n_count(m, c, y, n).value + 1e-12);
  }
}

TEST(Transversality, Submultiplicative) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  for (const auto& r : submultiplicativity_table(m, c, 5, 4)) EXPECT_LE(r.ratio, 1.0 + 1e-9) << r.n << "+" << r.m;
}

TEST(Transversality, OnsetOnE1) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  const N0Report r = n0_estimate(m, c, 10, 4);
  ASSERT_TRUE(r.found);
  EXPECT_EQ(r.n0, 3);
  for (const auto& p : r.points) {
    ASSERT_GT(p.n, 0);
    EXPECT_TRUE(is_transversal(m, c, p.witness_points.first, p.witness_points.second, p.n));
  }
}

TEST(Transversality, NoOnsetOnE0) {
  ConeParams c;
  c.chi_u = 0.5;
  EXPECT_FALSE(n0_estimate(examples::E0(), c, 6, 2).found);
}

TEST(FrakN, E0IsOne) {
  const MapSpec m = examples::E0();
  ConeParams c;
  c.chi_u = 0.5;
  const FiberField h(m);
  for (int n = 1; n <= 4; ++n) {
    const FrakNReport r = frak_n(m, c, h, {0.3, 0.4}, n);
    EXPECT_NEAR(r.value, 1.0, 1e-12);
    EXPECT_NEAR(r.all_branches, 1.0, 1e-12);
  }
}

TEST(FrakN, AllBranchesIsFiberIdentityAtZeroEps) {
  // with eps = 0 the weighted sum over all preimages is the fiber transfer
  // operator applied to h_*, which returns h_*
  const MapSpec m = examples::E1(0.0);
  ConeParams c;
  c.chi_u = 0.2;
  const FiberField h(m);
  for (int n = 1; n <= 4; ++n) EXPECT_NEAR(frak_n(m, c, h, {0.61, 0.2}, n).all_branches, 1.0, 1e-10);
}

TEST(FrakN, DropsBelowOneAtOnset) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  const FiberField h(m);
  EXPECT_LT(frak_n_sup(m, c, h, 3, 4).value, 0.99);
}

TEST(Relation, ProductFormHolds) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  for (int n = 1; n <= 6; ++n) {
    const RelationReport r = relation_check(m, c, n, 0.5, 4);
    EXPECT_GE(r.product_slack, -1e-9) << "n=" << n;
    EXPECT_NEAR(r.lhs, std::pow(r.N, 1.0 / n), 1e-12);
  }
}

TEST(Relation, RejectsBadAlpha) {
  const MapSpec m = examples::E1(0.05);
  const ConeParams c = e1_setup().cones;
  EXPECT_THROW(relation_check(m, c, 3, 1.5, 4), ConfigError);
  EXPECT_THROW(relation_check(m, c, 11, 0.5, 4), ConfigError);
}

TEST(MainAssumption, ReportIsConsistent) {
  const MapSpec m = examples::E1(0.05);
  const ConeSetup s = e1_setup();
  MainAssumptionOptions opt;
  opt.grid = 4;
  opt.m_grid = 2;
  const MainAssumptionReport r = main_assumption_check(m, s, 1, 20, opt);
  EXPECT_DOUBLE_EQ(r.value, std::max(r.first, r.second));
  EXPECT_EQ(r.pass, r.value < 1.0);
  EXPECT_FALSE(r.unverifiable.empty());
  EXPECT_EQ(r.depth, static_cast<int>(std::ceil(r.alpha * 20 - 1e-12)));
}

TEST(MainAssumption, DepthTooLarge) {
  const MapSpec m = examples::E1(0.05);
  const ConeSetup s = e1_setup();
  MainAssumptionOptions opt;
  opt.max_depth = 0;
  EXPECT_THROW(main_assumption_check(m, s, 1, 50, opt), DepthTooLarge);
}
