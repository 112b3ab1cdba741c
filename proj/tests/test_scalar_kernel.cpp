#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "nsoc/scalar_kernel.hpp"
#include "oracles.hpp"

using namespace nsoc;

TEST_CASE("exponent accepts only the open unit interval") {
  CHECK_NOTHROW(Exponent(0.5));
  CHECK_THROWS_AS(Exponent(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Exponent(1.0), std::invalid_argument);
  CHECK_THROWS_AS(Exponent(-0.2), std::invalid_argument);
  CHECK_THROWS_AS(Exponent(std::nan("")), std::invalid_argument);
}

TEST_CASE("phi closed-form values") {
  CHECK(phi(0.0, Exponent(0.5)) == 0.0);
  CHECK(phi(-4.0, Exponent(0.5)) == doctest::Approx(-2.0).epsilon(1e-15));
  for (double a : {0.1, 0.5, 0.9}) CHECK(phi(1.0, Exponent(a)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isinf(phi_slope(0.0, Exponent(0.5))));
  CHECK(phi_slope(4.0, Exponent(0.5)) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("phi is odd and nondecreasing") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const Exponent a(0.05 + 0.9 * std::abs(dist(rng)) / 10.0);
    double s1 = dist(rng), s2 = dist(rng);
    if (s1 > s2) std::swap(s1, s2);
    CHECK(phi(s1, a) <= phi(s2, a));
    CHECK(phi(-s1, a) == -phi(s1, a));
  }
}

TEST_CASE("potential closed form and derivative") {
  CHECK(potential(0.0, Exponent(0.5)) == 0.0);
  CHECK(potential(-1.0, Exponent(0.5)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const Exponent a(0.3);
  const double eps = 1e-6;
  const double fd = (potential(0.7 + eps, a) - potential(0.7 - eps, a)) / (2 * eps);
  CHECK(std::abs(fd - phi(0.7, a)) <= 1e-6);
  for (double s : {-3.0, -0.2, 0.05, 1.5}) {
    const double d = (potential(s + eps, a) - potential(s - eps, a)) / (2 * eps);
    CHECK(std::abs(d - phi(s, a)) <= 1e-6);
  }
}

TEST_CASE("potential increment matches the plain difference and resolves tiny steps") {
  const Exponent a(0.5);
  CHECK(potential_increment(1.0, 1.0, a) == 0.0);
  CHECK(potential_increment(-2.0, 3.0, a) == doctest::Approx(potential(3.0, a) - potential(-2.0, a)));
  CHECK(potential_increment(0.0, 0.5, a) == doctest::Approx(potential(0.5, a)));
  // First-order: increment ≈ phi(a) * step for a step far below sqrt(epsilon).
  const double step = 1e-12;
  const double inc = potential_increment(2.0, 2.0 + step, a);
  CHECK(inc == doctest::Approx(phi(2.0, a) * step).epsilon(1e-3));
}

TEST_CASE("prox closed-form values and errors") {
  CHECK(prox_potential(0.0, 1.0, Exponent(0.5)) == 0.0);
  CHECK(prox_potential(2.0, 1.0, Exponent(0.5)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(prox_potential(-2.0, 1.0, Exponent(0.5)) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_THROWS_AS((void)prox_potential(1.0, 0.0, Exponent(0.5)), std::invalid_argument);
  CHECK_THROWS_AS((void)prox_potential(1.0, -1.0, Exponent(0.5)), std::invalid_argument);
  CHECK_THROWS_AS((void)prox_potential(1.0, std::numeric_limits<double>::infinity(), Exponent(0.5)),
                  std::invalid_argument);
}

TEST_CASE("prox agrees with a bisection oracle") {
  const auto oracle = [](double v, double t, double e) {
    const double a = std::abs(v);
    const double x = testing::bisect([&](double s) { return s + t * std::pow(s, e) - a; }, 0.0, a, 1e-15);
    return std::copysign(x, v);
  };
  CHECK(std::abs(prox_potential(5.0, 2.0, Exponent(0.3)) - oracle(5.0, 2.0, 0.3)) <= 1e-14 * 5.0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> vd(-20.0, 20.0), td(1e-6, 5.0), ed(0.05, 0.95);
  for (int k = 0; k < 2000; ++k) {
    const double v = k % 5 == 0 ? vd(rng) * 1e-6 : vd(rng);
    const double t = td(rng);
    const double e = ed(rng);
    const double x = prox_potential(v, t, Exponent(e));
    CHECK(std::abs(x - oracle(v, t, e)) <= 1e-13 * std::max(1.0, std::abs(v)));
  }
}

TEST_CASE("prox is nonexpansive") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> vd(-3.0, 3.0);
  const Exponent a(0.4);
  for (int k = 0; k < 1000; ++k) {
    const double v1 = vd(rng), v2 = vd(rng);
    CHECK(std::abs(prox_potential(v1, 0.7, a) - prox_potential(v2, 0.7, a)) <= std::abs(v1 - v2) * (1 + 1e-12));
  }
}

TEST_CASE("expansion identities") {
  SUBCASE("vanishing direction") {
    const auto r = expansion_residuals(0.8, 0.3, 0.0, Exponent(0.5));
    CHECK(r.r1 == 0.0);
    CHECK(r.r2 == 0.0);
    CHECK(r.r3 == 0.0);
  }
  SUBCASE("sign flip") {
    const auto r = expansion_residuals(1.0, 1.0, -2.0, Exponent(0.5));
    CHECK(r.lhs3 == 0.0);
    CHECK(r.r3 == 0.0);
  }
  SUBCASE("zero base is rejected") {
    CHECK_THROWS_AS((void)expansion_residuals(0.0, 1.0, 1.0, Exponent(0.5)), std::invalid_argument);
    CHECK_THROWS_AS((void)expansion_residuals(1.0, 0.0, 1.0, Exponent(0.5)), std::invalid_argument);
  }
  SUBCASE("random draws, including small |x| and crossings of zero") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> xd(-2.0, 2.0), td(0.0, 1.0);
    const double betas[] = {0.25, 0.5, 0.75};
    for (int k = 0; k < 300; ++k) {
      double x = xd(rng);
      if (std::abs(x) < 1e-3) x = 1e-3;
      const double t = 1.0 - td(rng);
      const double z = xd(rng);
      const auto r = expansion_residuals(x, t, z, Exponent(betas[k % 3]));
      CHECK(r.r1 <= 1e-8 * (1 + std::abs(r.lhs1)));
      CHECK(r.r2 <= 1e-8 * (1 + std::abs(r.lhs2)));
      CHECK(r.r3 <= 1e-8 * (1 + std::abs(r.lhs3)));
    }
  }
  SUBCASE("endpoint x + tz = 0") {
    const auto r = expansion_residuals(0.5, 0.5, -1.0, Exponent(0.25));
    CHECK(r.r1 <= 1e-8 * (1 + std::abs(r.lhs1)));
  }
}

TEST_CASE("kernel integral closed form for beta with b = a") {
  // (1-s) a^(β-1) integrates to a^(β-1)/2.
  const long double v = taylor_kernel_integral(2.0L, 2.0L, 0.5);
  CHECK(static_cast<double>(v) == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-13));
  // b = 0: ∫(1-s)^β a^(β-1) ds = a^(β-1)/(β+1).
  const long double w = taylor_kernel_integral(1.0L, 0.0L, 0.25);
  CHECK(static_cast<double>(w) == doctest::Approx(1.0 / 1.25).epsilon(1e-10));
}
