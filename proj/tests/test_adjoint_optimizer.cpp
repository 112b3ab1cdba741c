#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "nsoc/adjoint_optimizer.hpp"

using namespace nsoc;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

Field random_field(const Grid& g, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = d(rng);
  return f;
}

Field sine(const Grid& g) {
  return Field::from_function(g, [](double x, double) { return std::sin(kPi * x); });
}

ControlProblem tracking(int n, double lo, double hi) {
  const auto d = Discretization::make(1, n);
  return ControlProblem(d, Exponent(0.5), sine(d->grid()), 1e-2, lo, hi);
}

double reduced_objective(const ControlProblem& cp, const Field& u) {
  SolveOptions o;
  o.tol = 1e-12;
  return objective(solve_state(cp.state_problem(u), o).y, u, cp).value;
}

}  // namespace

TEST_CASE("objective values and partials") {
  const auto cp = tracking(16, -kInf, kInf);
  const auto& d = *cp.disc;
  const auto at_target = objective(cp.target, d.zeros(), cp);
  CHECK(at_target.value == 0.0);
  CHECK(at_target.dJ_dy.max_abs() == 0.0);
  CHECK(at_target.dJ_du.max_abs() == 0.0);

  const Field u = Field::constant(d.grid(), 3.0);
  const double tik = objective(cp.target, u, cp).value;
  CHECK(objective(cp.target, 2.0 * u, cp).value == doctest::Approx(4 * tik));

  std::mt19937_64 rng(41);
  const Field y = random_field(d.grid(), rng, -1, 1);
  const Field hy = random_field(d.grid(), rng, -1, 1);
  const Field hu = random_field(d.grid(), rng, -1, 1);
  const auto base = objective(y, u, cp);
  const double analytic = d.l2_inner(base.dJ_dy, hy) + d.l2_inner(base.dJ_du, hu);
  const double eps = 1e-5;
  Field yp = y, ym = y, up = u, um = u;
  yp.axpy(eps, hy);
  ym.axpy(-eps, hy);
  up.axpy(eps, hu);
  um.axpy(-eps, hu);
  const double fd = (objective(yp, up, cp).value - objective(ym, um, cp).value) / (2 * eps);
  CHECK(std::abs(fd - analytic) <= 1e-7 * std::abs(analytic));
}

TEST_CASE("control problem validation") {
  const auto d = Discretization::make(1, 8);
  const Field t = sine(d->grid());
  CHECK_THROWS_AS(ControlProblem(d, Exponent(0.5), t, 0.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ControlProblem(d, Exponent(0.5), t, 1.0, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ControlProblem(d, Exponent(0.5), t, 1.0, kInf, kInf), std::invalid_argument);
  CHECK_THROWS_AS(ControlProblem(d, Exponent(0.5), t, 1.0, std::nan(""), 1.0), std::invalid_argument);
}

TEST_CASE("adjoint state") {
  std::mt19937_64 rng(43);
  const Exponent a(0.5);
  const auto d = Discretization::make(1, 64);
  const auto plateau = manufactured_instance("plateau", d->grid(), a);
  ControlProblem cp(d, a, sine(d->grid()), 1e-2, -kInf, kInf);
  const auto rg = reduced_gradient(plateau.u, cp);
  for (std::size_t i = 0; i < rg.p.size(); ++i) {
    if (rg.sys.mask()[i]) CHECK(rg.p[i] == 0.0);
  }
  const Field dJ = rg.y - cp.target;
  for (int k = 0; k < 20; ++k) {
    const Field h = random_field(d->grid(), rng, -1, 1);
    CHECK(std::abs(d->l2_inner(dJ, apply_S_prime(rg.sys, h)) - d->l2_inner(rg.p, h)) <= 1e-10);
  }
  CHECK(solve_adjoint(rg.sys, d->zeros()).max_abs() == 0.0);
}

TEST_CASE("reduced gradient") {
  SUBCASE("zero target and control are stationary") {
    const auto d = Discretization::make(1, 16);
    ControlProblem cp(d, Exponent(0.5), d->zeros(), 1e-2, -kInf, kInf);
    const auto rg = reduced_gradient(d->zeros(), cp);
    CHECK(rg.g.max_abs() == 0.0);
    CHECK(kkt_residual(d->zeros(), cp).residual == 0.0);
  }
  SUBCASE("doubling nu adds nu u") {
    auto cp = tracking(32, -kInf, kInf);
    const Field u = Field::constant(cp.disc->grid(), 5.0);
    const auto g1 = reduced_gradient(u, cp);
    const double nu = cp.nu;
    cp.nu = 2 * nu;
    const auto g2 = reduced_gradient(u, cp);
    CHECK((g2.g - g1.g - nu * u).max_abs() <= 1e-14);
  }
  SUBCASE("matches central differences") {
    std::mt19937_64 rng(45);
    const auto cp = tracking(48, -kInf, kInf);
    const auto& d = *cp.disc;
    for (int k = 0; k < 3; ++k) {
      const Field u = Field::constant(d.grid(), 10.0) + random_field(d.grid(), rng, -1, 1);
      const Field h = random_field(d.grid(), rng, -1, 1);
      const double analytic = d.l2_inner(reduced_gradient(u, cp).g, h);
      const double eps = 1e-5 * std::max(1.0, u.max_abs());
      Field up = u, um = u;
      up.axpy(eps, h);
      um.axpy(-eps, h);
      const double fd = (reduced_objective(cp, up) - reduced_objective(cp, um)) / (2 * eps);
      CHECK(std::abs(fd - analytic) <= 1e-4 * std::abs(fd));
    }
  }
}

TEST_CASE("box projection") {
  const auto cp = tracking(8, 0.0, 2.0);
  const auto& g = cp.disc->grid();
  const Field inside = Field::constant(g, 1.0);
  CHECK((project_box(inside, cp) - inside).max_abs() == 0.0);
  std::mt19937_64 rng(47);
  const Field u = random_field(g, rng, -5, 5);
  const Field once = project_box(u, cp);
  CHECK((project_box(once, cp) - once).max_abs() == 0.0);
  const auto pinned = tracking(8, 0.7, 0.7);
  CHECK((project_box(u, pinned) - Field::constant(g, 0.7)).max_abs() == 0.0);
}

TEST_CASE("projected gradient") {
  SUBCASE("trivial problem returns immediately") {
    const auto d = Discretization::make(1, 16);
    ControlProblem cp(d, Exponent(0.5), d->zeros(), 1e-2, -1.0, 1.0);
    const auto r = projected_gradient_solve(cp, d->zeros(), 1e-8, 100);
    CHECK(r.converged);
    CHECK(r.history.iterations == 0);
    CHECK(r.u.max_abs() == 0.0);
  }
  SUBCASE("unconstrained stationarity gives u = -p/nu") {
    const auto cp = tracking(32, -kInf, kInf);
    const auto r = projected_gradient_solve(cp, cp.disc->zeros(), 1e-9, 2000);
    REQUIRE(r.converged);
    const auto rg = reduced_gradient(r.u, cp);
    Field fixed = r.u;
    fixed.axpy(1.0 / cp.nu, rg.p);
    CHECK(std::sqrt(cp.disc->l2_inner(fixed, fixed)) <= 10 * 1e-9);
  }
  SUBCASE("box-constrained tracking instance") {
    const auto cp = tracking(64, 0.0, 2.0);
    std::mt19937_64 rng(49);
    std::vector<Field> sols;
    for (int s = 0; s < 3; ++s) {
      const auto r = projected_gradient_solve(cp, random_field(cp.disc->grid(), rng, 0, 2), 1e-8, 500);
      REQUIRE(r.converged);
      const auto k = kkt_residual(r.u, cp);
      CHECK(k.residual <= 1e-8);
      CHECK(k.projection_residual <= 1e-7);
      for (std::size_t i = 1; i < r.history.objective.size(); ++i)
        CHECK(r.history.objective[i] <= r.history.objective[i - 1]);
      sols.push_back(r.u);
    }
    for (const auto& u : sols) {
      const Field diff = u - sols.front();
      CHECK(std::sqrt(cp.disc->l2_inner(diff, diff)) <= 1e-6);
    }
    CHECK(bouligand_gap(sols.front(), cp, 200, 5) >= -1e-7);
    std::ostringstream os;
    const auto r = projected_gradient_solve(cp, cp.disc->zeros(), 1e-8, 500);
    r.history.write(os);
    CHECK(os.str().rfind("iter,objective,kkt_residual,step\n", 0) == 0);
  }
}

TEST_CASE("KKT residual and Bouligand gap away from stationarity") {
  std::mt19937_64 rng(51);
  const auto cp = tracking(32, -5.0, 5.0);
  const Field u = random_field(cp.disc->grid(), rng, -5, 5);
  CHECK(kkt_residual(u, cp).residual > 1e-3);
  // The state vanishes at u = 0, the derivative is zero there and u = 0 is stationary.
  CHECK(bouligand_gap(cp.disc->zeros(), cp, 100, 3) == 0.0);
  CHECK(bouligand_gap(Field::constant(cp.disc->grid(), 1.0), cp, 100, 3) < 0.0);
  const Field fixed = Field::constant(cp.disc->grid(), 0.3);
  const std::vector<double> b(fixed.vector());
  const ControlProblem pinned(cp.disc, cp.alpha, cp.target, cp.nu, b, b);
  CHECK(bouligand_gap(fixed, pinned, 50, 3) == 0.0);
}

TEST_CASE("KKT and Bouligand agree at the discrete level") {
  const auto cp = tracking(32, 0.0, 2.0);
  const double tol = 1e-8;
  const auto r = projected_gradient_solve(cp, cp.disc->zeros(), tol, 500);
  REQUIRE(r.converged);
  CHECK(bouligand_gap(r.u, cp, 300, 9) >= -10 * tol);

  std::mt19937_64 rng(53);
  const Field u = random_field(cp.disc->grid(), rng, 0, 2);
  REQUIRE(kkt_residual(u, cp).residual > 100 * tol);
  CHECK(bouligand_gap(u, cp, 1000, 9) < 0.0);
}

TEST_CASE("truncation chain") {
  const auto cp = tracking(32, 0.0, 2.0);
  const auto r = projected_gradient_solve(cp, cp.disc->zeros(), 1e-8, 500);
  const auto rg = reduced_gradient(r.u, cp);
  const Field dJ = rg.y - cp.target;
  const double pmax = rg.p.max_abs();
  const std::vector<double> ks{0.0, 0.25 * pmax, 0.5 * pmax, pmax, 2 * pmax};
  const auto t = stampacchia_truncation_check(rg.p, dJ, rg.sys, ks);
  CHECK(truncation_chain_holds(t, 1e-10));
  CHECK(t.rows[3][1] == 0.0);
  CHECK(t.rows[4][3] == 0.0);
  // k = 0: the right end is the adjoint identity (dJ, p) = (p, p)_V.
  CHECK(t.rows[0][2] == doctest::Approx(t.rows[0][3]).epsilon(1e-10));
}

TEST_CASE("adjoint exponent sets") {
  CHECK(admissible_adjoint_exponents(2, 3) == Interval{1, true, kInf, true});
  CHECK(admissible_adjoint_exponents(2, 4) == Interval{1, true, kInf, false});
  CHECK(admissible_adjoint_exponents(2, 6).upper == doctest::Approx(6.0));
  CHECK_FALSE(admissible_adjoint_exponents(2, 6).upper_closed);
  CHECK(admissible_adjoint_exponents(kInf, 6) == Interval{1, true, kInf, true});
  CHECK_THROWS_AS((void)admissible_adjoint_exponents(1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)admissible_adjoint_exponents(1.5, 6), std::invalid_argument);
}
