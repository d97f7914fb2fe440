#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

namespace svph {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// cos/sin of 2*pi*k*x and 2*pi*l*theta for 0 <= k,l <= K, built by the
/// angle-addition recurrence from a single sincos per coordinate.
class TrigBasis {
 public:
  TrigBasis() = default;
  TrigBasis(double x, double theta, int K) { reset(x, theta, K); }

  void reset(double x, double theta, int K) {
    K_ = K;
    fill(x, cx_, sx_);
    fill(theta, ct_, st_);
  }

  int K() const { return K_; }

  /// cos and sin of 2*pi*(k*x + l*theta), negative indices allowed.
  void mode(int k, int l, double& c, double& s) const {
    const double ckx = cx_[std::abs(k)];
    const double skx = k < 0 ? -sx_[-k] : sx_[k];
    const double clt = ct_[std::abs(l)];
    const double slt = l < 0 ? -st_[-l] : st_[l];
    c = ckx * clt - skx * slt;
    s = skx * clt + ckx * slt;
  }

 private:
  void fill(double v, std::vector<double>& c, std::vector<double>& s) const {
    c.assign(K_ + 1, 1.0);
    s.assign(K_ + 1, 0.0);
    if (K_ == 0) return;
    const double a = two_pi * (v - std::floor(v));
    c[1] = std::cos(a);
    s[1] = std::sin(a);
    for (int k = 2; k <= K_; ++k) {
      // direct evaluation keeps high harmonics at full accuracy
      if (k % 8 == 0) {
        c[k] = std::cos(k * a);
        s[k] = std::sin(k * a);
      } else {
        c[k] = c[k - 1] * c[1] - s[k - 1] * s[1];
        s[k] = s[k - 1] * c[1] + c[k - 1] * s[1];
      }
    }
  }

  int K_ = 0;
  std::vector<double> cx_, sx_, ct_, st_;
};

/// One term a*cos(2pi(kx+l theta)) + b*sin(2pi(kx+l theta)).
struct TrigTerm {
  int k = 0;
  int l = 0;
  double a = 0.0;
  double b = 0.0;
};

/// Value and first partials of a trigonometric polynomial at one point.
struct TrigJet {
  double value = 0.0;
  double dx = 0.0;
  double dtheta = 0.0;
};

/// Real trigonometric polynomial on the torus,
/// g(x, theta) = sum a cos(2pi(kx+l theta)) + b sin(2pi(kx+l theta)).
class TrigPoly2 {
 public:
  TrigPoly2() = default;
  explicit TrigPoly2(std::vector<TrigTerm> terms) : terms_(std::move(terms)) {
    for (const auto& t : terms_) K_ = std::max({K_, std::abs(t.k), std::abs(t.l)});
  }

  static TrigPoly2 zero() { return TrigPoly2{}; }

  void add_cos(int k, int l, double a) { add({k, l, a, 0.0}); }
  void add_sin(int k, int l, double b) { add({k, l, 0.0, b}); }
  void add(TrigTerm t) {
    terms_.push_back(t);
    K_ = std::max({K_, std::abs(t.k), std::abs(t.l)});
  }

  const std::vector<TrigTerm>& terms() const { return terms_; }
  int max_frequency() const { return K_; }
  bool is_zero() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const TrigTerm& t) { return t.a == 0.0 && (t.b == 0.0 || (t.k == 0 && t.l == 0)); });
  }

  double operator()(double x, double theta) const {
    return value(TrigBasis(x, theta, K_));
  }

  double value(const TrigBasis& basis) const {
    double v = 0.0;
    for (const auto& t : terms_) {
      double c, s;
      basis.mode(t.k, t.l, c, s);
      v += t.a * c + t.b * s;
    }
    return v;
  }

  TrigJet jet(const TrigBasis& basis) const {
    TrigJet j;
    for (const auto& t : terms_) {
      double c, s;
      basis.mode(t.k, t.l, c, s);
      j.value += t.a * c + t.b * s;
      const double d = -t.a * s + t.b * c;
      j.dx += two_pi * t.k * d;
      j.dtheta += two_pi * t.l * d;
    }
    return j;
  }

  TrigJet jet(double x, double theta) const { return jet(TrigBasis(x, theta, K_)); }

  /// Exact mixed partial d^i/dx^i d^j/dtheta^j, again a trig polynomial.
  TrigPoly2 derivative(int i, int j) const {
    TrigPoly2 out;
    for (const auto& t : terms_) {
      const double scale = std::pow(two_pi * t.k, i) * std::pow(two_pi * t.l, j);
      if (scale == 0.0) continue;
      // each derivative rotates (a, b) -> (b, -a)
      double a = t.a, b = t.b;
      for (int r = 0; r < (i + j) % 4; ++r) {
        const double na = b, nb = -a;
        a = na;
        b = nb;
      }
      out.add({t.k, t.l, scale * a, scale * b});
    }
    return out;
  }

  TrigPoly2 scaled(double s) const {
    TrigPoly2 out = *this;
    for (auto& t : out.terms_) {
      t.a *= s;
      t.b *= s;
    }
    return out;
  }

  /// sum of term amplitudes, an upper bound for sup |g|
  double amplitude_bound() const {
    double m = 0.0;
    for (const auto& t : terms_) m += std::hypot(t.a, t.b);
    return m;
  }

  /// Upper bound for |g(p) - g(q)| / max(|dx|, |dtheta|).
  double lipschitz_bound() const {
    double m = 0.0;
    for (const auto& t : terms_)
      m += two_pi * (std::abs(t.k) + std::abs(t.l)) * std::hypot(t.a, t.b);
    return m;
  }

  /// Same bound split by coordinate: {sup|d_x g|, sup|d_theta g|}.
  std::pair<double, double> gradient_bounds() const {
    double gx = 0.0, gt = 0.0;
    for (const auto& t : terms_) {
      gx += two_pi * std::abs(t.k) * std::hypot(t.a, t.b);
      gt += two_pi * std::abs(t.l) * std::hypot(t.a, t.b);
    }
    return {gx, gt};
  }

  bool depends_on_x() const {
    return std::any_of(terms_.begin(), terms_.end(),
                       [](const TrigTerm& t) { return t.k != 0 && (t.a != 0.0 || t.b != 0.0); });
  }
  bool depends_on_theta() const {
    return std::any_of(terms_.begin(), terms_.end(),
                       [](const TrigTerm& t) { return t.l != 0 && (t.a != 0.0 || t.b != 0.0); });
  }

 private:
  std::vector<TrigTerm> terms_;
  int K_ = 0;
};

}  // namespace svph
