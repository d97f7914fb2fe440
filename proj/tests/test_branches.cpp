#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "svph/branches.hpp"
#include "svph/curves.hpp"
#include "svph/map_io.hpp"

using namespace svph;

TEST(Preimages, E0OneStep) {
  auto pre = preimages(examples::E0(), {0.3, 0.5}, 1);
  ASSERT_EQ(pre.size(), 2u);
  std::vector<double> xs{pre[0].point.x, pre[1].point.x};
  std::sort(xs.begin(), xs.end());
  EXPECT_NEAR(xs[0], 0.15, 1e-15);
  EXPECT_NEAR(xs[1], 0.65, 1e-15);
  EXPECT_EQ(pre[0].point.theta, 0.5);
}

TEST(Preimages, E0TenSteps) {
  const auto pre = preimages(examples::E0(), {0.3, 0.5}, 10);
  ASSERT_EQ(pre.size(), 1024u);
  std::vector<double> xs;
  for (const auto& q : pre) {
    EXPECT_EQ(q.point.theta, 0.5);
    xs.push_back(q.point.x);
    EXPECT_DOUBLE_EQ(q.det, 1024.0);
  }
  std::sort(xs.begin(), xs.end());
  for (int k = 0; k < 1024; ++k) EXPECT_NEAR(xs[k], (0.3 + k) / 1024.0, 1e-14);
}

TEST(Preimages, E1ForwardCheck) {
  const MapSpec m = examples::E1(0.05);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // distinct preimages are separated by at least one lap of f^3 at the largest slope
  const double lam = 3.0 + 0.2 * std::numbers::pi;
  for (int s = 0; s < 20; ++s) {
    const Point2 p{u(rng), u(rng)};
    const auto pre = preimages(m, p, 3);
    ASSERT_EQ(pre.size(), 27u);
    for (const auto& q : pre) EXPECT_LE(torus_distance(iterate(m, q.point, 3), p), 1e-11);
    for (std::size_t i = 0; i < pre.size(); ++i)
      for (std::size_t j = i + 1; j < pre.size(); ++j)
        EXPECT_GE(torus_distance(pre[i].point, pre[j].point), std::pow(lam, -3) / 2);
  }
}

TEST(Preimages, CountAndWordsDeep) {
  const MapSpec m = examples::E1(0.05);
  const auto pre = preimages(m, {0.77, 0.12}, 7);
  EXPECT_EQ(pre.size(), 2187u);
  double worst = 0.0;
  for (const auto& q : pre) {
    EXPECT_EQ(q.id.depth(), 7u);
    worst = std::max(worst, torus_distance(iterate(m, q.point, 7), {0.77, 0.12}));
  }
  EXPECT_LE(worst, 1e-11);
  EXPECT_THROW(preimages(m, {0, 0}, 15), ConfigError);
}

TEST(Preimages, DeterminantMatchesProduct) {
  const MapSpec m = examples::E1(0.05);
  for (const auto& q : preimages(m, {0.4, 0.9}, 4)) EXPECT_NEAR(q.det / det_n(m, q.point, 4), 1.0, 1e-12);
}

TEST(Preimages, Semigroup) {
  const MapSpec m = examples::E1(0.05);
  const Point2 p{0.61, 0.33};
  const auto whole = preimages(m, p, 4);
  std::vector<std::pair<std::string, Point2>> composed;
  for (const auto& a : preimages(m, p, 2))
    for (const auto& b : preimages(m, a.point, 2)) composed.push_back({a.id.then(b.id).str(), b.point});
  ASSERT_EQ(composed.size(), whole.size());
  for (std::size_t i = 0; i < whole.size(); ++i) {
    EXPECT_EQ(whole[i].id.str(), composed[i].first);
    EXPECT_LE(torus_distance(whole[i].point, composed[i].second), 1e-10);
  }
}

TEST(Pullback, E0VerticalLines) {
  const auto curves = pull_back_curve(examples::E0(), CentralCurve::vertical(0.3, 64), 2);
  ASSERT_EQ(curves.size(), 4u);
  std::vector<double> xs;
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.curve.size(); ++i) {
      EXPECT_NEAR(c.curve.x[i], c.curve.x[0], 1e-14);
      EXPECT_NEAR(c.reparam.h[i], static_cast<double>(i) / 64, 1e-14);
    }
    xs.push_back(wrap01(c.curve.x[0]));
  }
  std::sort(xs.begin(), xs.end());
  const double expect[] = {0.075, 0.325, 0.575, 0.825};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(xs[k], expect[k], 1e-14);
}

TEST(Pullback, UncoupledKeepsFibers) {
  const MapSpec m = examples::E1(0.0);
  const auto curves = pull_back_curve(m, CentralCurve::sinusoid(0.4, 0.1, 1, 128), 2);
  EXPECT_EQ(curves.size(), 9u);
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.curve.size(); ++i) EXPECT_NEAR(c.reparam.h[i], static_cast<double>(i) / 128, 1e-14);
}

TEST(Pullback, ResidualAndReparamBounds) {
  const MapSpec m = examples::E1(0.05);
  const CentralCurve g = CentralCurve::sinusoid(0.4, 0.05, 1, 2048);
  const ConeSetup s = cone_parameters(m, 5, 128);
  const int n = 3;
  double hmin = 1e300, hmax = 0.0;
  for (const auto& c : pull_back_curve(m, g, n)) {
    EXPECT_LE(pullback_residual(m, g, c, n, 16), 1e-9);
    EXPECT_LE(c.closure_defect, 1e-9);
    // finite differences of h_n against the stored derivative
    for (std::size_t i = 0; i + 1 < c.reparam.h.size(); i += 64) {
      const double fd = (c.reparam.h[i + 1] - c.reparam.h[i]) * c.reparam.h.size();
      EXPECT_NEAR(fd, 0.5 * (c.reparam.dh[i] + c.reparam.dh[i + 1]), 1e-4);
      hmin = std::min(hmin, c.reparam.dh[i]);
      hmax = std::max(hmax, c.reparam.dh[i]);
    }
  }
  const double mu = s.constants.mu;
  EXPECT_GE(hmin, std::pow(mu, -n) / 2.0);
  EXPECT_LE(hmax, 2.0 * std::pow(mu, n) * std::sqrt(2.0));
}

TEST(Pullback, DisjointAndTiling) {
  const MapSpec m = examples::E1(0.05);
  const auto curves = pull_back_curve(m, CentralCurve::sinusoid(0.2, 0.08, 1, 256), 2);
  ASSERT_EQ(curves.size(), 9u);
  EXPECT_GT(pullback_min_gap(curves), 1e-3);
}

TEST(Pullback, ContractionOfCurveFamily) {
  const MapSpec m = examples::E1(0.05);
  const CentralCurve g1 = CentralCurve::vertical(0.3, 256);
  const CentralCurve g2 = CentralCurve::sinusoid(0.3, 0.02, 1, 256);
  std::vector<double> dist;
  for (int n = 1; n <= 4; ++n) {
    const auto a = pull_back_curve(m, g1, n), b = pull_back_curve(m, g2, n);
    double d = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      ASSERT_EQ(a[c].id, b[c].id);
      for (std::size_t i = 0; i < a[c].curve.size(); ++i)
        d = std::max(d, std::abs(centered_mod1(a[c].curve.x[i] - b[c].curve.x[i])));
    }
    dist.push_back(d);
  }
  for (std::size_t i = 1; i < dist.size(); ++i) EXPECT_LT(dist[i], dist[i - 1]);
}

TEST(CurveClass, Vertical) {
  const CurveClassReport r = curve_class_check(CentralCurve::vertical(0.3, 256), 1.0, 3);
  EXPECT_TRUE(r.pass);
  for (double v : r.derivative_norms) EXPECT_EQ(v, 0.0);
}

TEST(CurveClass, SplineDerivativesOfSinusoid) {
  const CentralCurve c = CentralCurve::sinusoid(0.1, 0.05, 2, 2048);
  const double w = two_pi * 2;
  for (std::size_t i = 0; i < c.size(); i += 97) {
    const double t = static_cast<double>(i) / c.size();
    EXPECT_NEAR(c.ddx[i], -0.05 * w * w * std::sin(w * t), 1e-5);
    EXPECT_NEAR(c.dddx[i], -0.05 * w * w * w * std::cos(w * t), 1e-2);
  }
}

TEST(CurveClass, PulledBackSinusoidSettles) {
  const MapSpec m = examples::E1(0.05);
  const CentralCurve g = CentralCurve::sinusoid(0.4, 0.05, 1, 1024);
  const double c = 4.0;
  ASSERT_TRUE(curve_class_check(g, c, 3).pass);
  double worst_dd = 0.0;
  bool all = true;
  int count = 0;
  for_each_pullback(m, g, 8, [&](const PulledCurve& p) {
    if (count++ % 97 != 0) return;
    const CurveClassReport r = curve_class_check(p.curve, c, 3, 1.0, p.closure_defect);
    all = all && r.pass;
    worst_dd = std::max(worst_dd, r.derivative_norms[0]);
  });
  EXPECT_TRUE(all);
  EXPECT_LT(worst_dd, c);
}

TEST(CurveClass, OverCurvedFails) {
  const double c = 1.0;
  // |x''| = a (2pi)^2 = 5 c, tangent still inside the cone
  const double a = 5.0 * c / (two_pi * two_pi);
  const CentralCurve g = CentralCurve::sinusoid(0.5, a, 1, 1024);
  ASSERT_LT(a * two_pi, 1.0);
  const CurveClassReport r = curve_class_check(g, c, 2);
  EXPECT_FALSE(r.derivative_bounds);
  EXPECT_TRUE(r.tangent_in_cone);
  EXPECT_NEAR(r.derivative_norms[0], 5.0 * c, 1e-3);
}

TEST(CurveClass, ParseSpec) {
  EXPECT_NEAR(parse_curve("vertical:0.3", 16).x[5], 0.3, 1e-15);
  EXPECT_NEAR(parse_curve("sine:0.1:0.05:2", 16).x[2], 0.1 + 0.05 * std::sin(two_pi * 2 * 2 / 16.0), 1e-15);
  EXPECT_THROW(parse_curve("circle:1"), ConfigError);
  EXPECT_THROW(parse_curve("vertical:abc"), ConfigError);
}
