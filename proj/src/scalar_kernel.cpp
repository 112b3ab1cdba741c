#include "nsoc/scalar_kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nsoc {

Exponent::Exponent(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw std::invalid_argument("exponent must lie in (0, 1), got " + std::to_string(value));
  }
}

double abs_pow(double s, double e) noexcept {
  if (s == 0.0) return 0.0;
  return std::exp(e * std::log(std::abs(s)));
}

double phi(double s, Exponent alpha) noexcept {
  if (s == 0.0) return 0.0;
  const double m = abs_pow(s, alpha.value());
  return s > 0.0 ? m : -m;
}

double phi_slope(double s, Exponent alpha) noexcept {
  if (s == 0.0) return std::numeric_limits<double>::infinity();
  return alpha.value() * abs_pow(s, alpha.value() - 1.0);
}

double potential(double s, Exponent alpha) noexcept {
  const double p = alpha.value() + 1.0;
  return abs_pow(s, p) / p;
}

double potential_increment(double a, double b, Exponent alpha) noexcept {
  if (a == b) return 0.0;
  const double p = alpha.value() + 1.0;
  if (a != 0.0 && b != 0.0 && (a > 0.0) == (b > 0.0)) {
    const double base = std::abs(a);
    const double rel = (std::abs(b) - base) / base;
    return abs_pow(base, p) * std::expm1(p * std::log1p(rel)) / p;
  }
  return potential(b, alpha) - potential(a, alpha);
}

double prox_potential(double v, double t, Exponent alpha) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("prox_potential: step t must be positive and finite");
  }
  if (v == 0.0) return 0.0;

  // g(x) = x + t x^α - |v| is strictly increasing and concave on (0, |v|], so
  // Newton started left of the root increases monotonically toward it.
  const double a = std::abs(v);
  const double e = alpha.value();

  // Bracket [lo, hi] with hi = min(a, (a/t)^(1/α)). From x <= a follows
  // x >= a - t a^α; from x <= (a/t)^(1/α) follows x >= ((a - hi)/t)^(1/α).
  const double ae = abs_pow(a, e);
  double lo = 0.0;
  double hi = a;
  if (t * ae <= a) {
    lo = std::max(0.0, a - t * ae);
  } else {
    hi = abs_pow(a / t, 1.0 / e);
    if (!(hi > 0.0)) return std::copysign(0.0, v);
    lo = std::min(hi, abs_pow(std::max(0.0, a - hi) / t, 1.0 / e));
  }

  double x = lo > 0.0 ? lo : hi;
  for (int it = 0; it < 200; ++it) {
    const double xe = abs_pow(x, e);
    const double gx = x + t * xe - a;
    if (gx == 0.0) break;
    if (gx > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * a) break;
    const double step = gx / (1.0 + t * e * xe / x);
    const double candidate = x - step;
    if (candidate > lo && candidate < hi) {
      x = candidate;
      if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * x) break;
    } else if (candidate == lo || candidate == hi) {
      break;
    } else {
      x = 0.5 * (lo + hi);
    }
  }
  return std::copysign(x, v);
}

namespace {

constexpr int kGaussPoints = 16;

struct GaussRule {
  std::array<long double, kGaussPoints> nodes{};
  std::array<long double, kGaussPoints> weights{};
};

// Legendre roots by Newton iteration on P_n, on the reference interval [-1, 1].
GaussRule make_gauss_rule() {
  GaussRule rule;
  constexpr int n = kGaussPoints;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    long double z = std::cos(std::numbers::pi_v<long double> * (i + 0.75L) / (n + 0.5L));
    long double dp = 0.0L;
    for (int it = 0; it < 100; ++it) {
      long double p1 = 1.0L;
      long double p2 = 0.0L;
      for (int j = 1; j <= n; ++j) {
        const long double p3 = p2;
        p2 = p1;
        p1 = ((2.0L * j - 1.0L) * z * p2 - (j - 1.0L) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0L);
      const long double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-19L) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    const long double w = 2.0L / ((1.0L - z * z) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const GaussRule& gauss_rule() {
  static const GaussRule rule = make_gauss_rule();
  return rule;
}

template <class F>
long double integrate_panel(const F& f, long double lo, long double hi) {
  const auto& rule = gauss_rule();
  const long double mid = 0.5L * (lo + hi);
  const long double half = 0.5L * (hi - lo);
  long double sum = 0.0L;
  for (int i = 0; i < kGaussPoints; ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * sum;
}

}  // namespace

long double taylor_kernel_integral(long double a, long double b, double beta) {
  const long double bm1 = static_cast<long double>(beta) - 1.0L;
  const auto integrand = [&](long double s) {
    const long double base = (1.0L - s) * a + s * b;
    if (base <= 0.0L) return 0.0L;
    return (1.0L - s) * std::exp(bm1 * std::log(base));
  };
  // The integrand is singular at s = 1 when b = 0 and sharply peaked at s = 0
  // when a << b, so each half of [0, 1] is cut into dyadic panels shrinking
  // toward its outer end. A half is closed with one panel over the remaining
  // gap once a panel contributes less than 1e-12 relative to the running sum.
  const auto graded_half = [&](bool toward_one) {
    long double total = 0.0L;
    long double width = 0.25L;
    long double edge = 0.5L;
    for (int k = 0; k < 80; ++k) {
      const long double next = toward_one ? edge + width : edge - width;
      const long double piece = toward_one ? integrate_panel(integrand, edge, next) : integrate_panel(integrand, next, edge);
      total += piece;
      edge = next;
      width *= 0.5L;
      if (k > 0 && std::abs(piece) < 1e-12L * std::max(1.0L, std::abs(total))) break;
    }
    total += toward_one ? integrate_panel(integrand, edge, 1.0L) : integrate_panel(integrand, 0.0L, edge);
    return total;
  };
  return graded_half(false) + graded_half(true);
}

ExpansionResiduals expansion_residuals(double x_in, double t_in, double z_in, Exponent beta) {
  if (x_in == 0.0) throw std::invalid_argument("expansion_residuals: x must be nonzero");
  if (!(t_in > 0.0)) throw std::invalid_argument("expansion_residuals: t must be positive");

  using ld = long double;
  const ld x = x_in;
  const ld t = t_in;
  const ld z = z_in;
  const ld b = beta.value();
  const auto pw = [](ld s, ld e) -> ld { return s == 0.0L ? 0.0L : std::exp(e * std::log(std::abs(s))); };

  const ld ax = std::abs(x);
  const ld axz = std::abs(x + t * z);
  const ld sgn_x = x > 0 ? 1.0L : -1.0L;

  ExpansionResiduals out;

  // Taylor remainder of s -> s^(β+1) between |x| and |x + tz|.
  const ld lhs1 = ((pw(axz, b + 1) - pw(ax, b + 1)) / t - (b + 1) * pw(ax, b - 1) * x * z) / t;
  const ld abs_quot = ((axz - ax) / t - sgn_x * z) / t;
  const ld rhs1 = (b + 1) * pw(ax, b) * abs_quot +
                  (axz - ax) * (axz - ax) / (t * t) * (b * b + b) * taylor_kernel_integral(ax, axz, beta.value());
  out.lhs1 = static_cast<double>(lhs1);
  out.r1 = static_cast<double>(std::abs(lhs1 - rhs1));

  // Second-order difference quotient of |.|.
  const ld denom = ax * (axz + ax) * (axz + ax);
  const ld rhs2 = (ax * (axz - ax) - t * x * z) / denom * z * z;
  out.lhs2 = static_cast<double>(abs_quot);
  out.r2 = static_cast<double>(std::abs(abs_quot - rhs2));

  // Squared increment via the third binomial identity.
  const ld lhs3 = (axz - ax) * (axz - ax) / (t * t);
  const ld sum2 = (ax + axz) * (ax + axz);
  const ld rhs3 = 4 * x * x / sum2 * z * z + (4 * t * x * z + t * t * z * z) / sum2 * z * z;
  out.lhs3 = static_cast<double>(lhs3);
  out.r3 = static_cast<double>(std::abs(lhs3 - rhs3));
  return out;
}

}  // namespace nsoc
