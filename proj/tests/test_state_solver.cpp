#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nsoc/errors.hpp"
#include "nsoc/state_solver.hpp"
#include "nsoc/study.hpp"

using namespace nsoc;

namespace {

constexpr double kPi = std::numbers::pi;

Field random_field(const Grid& g, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = d(rng);
  return f;
}

SolveOptions tol(double t, SolveMethod m = SolveMethod::accel_prox) {
  SolveOptions o;
  o.tol = t;
  o.method = m;
  return o;
}

}  // namespace

TEST_CASE("energy of trivial and constant fields") {
  const auto d = Discretization::make(1, 8);
  const Exponent a(0.5);
  CHECK(energy(d->zeros(), StateProblem(d, a, d->zeros())) == 0.0);
  // Constant c: quadratic part is ½ cᵀA c (boundary rows only), potential part Σ M_ii c^(α+1)/(α+1).
  const double c = 2.0;
  const Field y = Field::constant(d->grid(), c);
  const StateProblem p(d, a, d->zeros());
  double pot = 0.0;
  for (double m : d->mass()) pot += m * std::pow(c, 1.5) / 1.5;
  CHECK(energy(y, p) == doctest::Approx(0.5 * d->h01_inner(y, y) + pot).epsilon(1e-14));
}

TEST_CASE("energy difference agrees with absolute energies") {
  std::mt19937_64 rng(2);
  const auto d = Discretization::make(2, 8);
  const StateProblem p(d, Exponent(0.3), random_field(d->grid(), rng, -3, 3));
  const Field y1 = random_field(d->grid(), rng, -1, 1);
  const Field y2 = random_field(d->grid(), rng, -1, 1);
  CHECK(energy_difference(y2, y1, p) == doctest::Approx(energy(y2, p) - energy(y1, p)).epsilon(1e-12));
}

TEST_CASE("zero control gives the zero state") {
  for (auto m : {SolveMethod::accel_prox, SolveMethod::coord_descent}) {
    const auto d = Discretization::make(1, 16);
    const auto sol = solve_state(StateProblem(d, Exponent(0.5), d->zeros()), tol(1e-10, m));
    CHECK(sol.y.max_abs() == 0.0);
    CHECK(sol.report.residual == 0.0);
  }
}

TEST_CASE("solutions minimize the energy") {
  std::mt19937_64 rng(4);
  const auto d = Discretization::make(1, 32);
  const StateProblem p(d, Exponent(0.5), random_field(d->grid(), rng, -5, 5));
  const auto sol = solve_state(p, tol(1e-11));
  CHECK(sol.report.residual <= 1e-11);
  for (int k = 0; k < 100; ++k) {
    const Field y = sol.y + random_field(d->grid(), rng, -1e-3, 1e-3);
    CHECK(energy_difference(y, sol.y, p) >= 0.0);
  }
}

TEST_CASE("residual contract and sensitivity to a bumped node") {
  std::mt19937_64 rng(6);
  const auto d = Discretization::make(1, 64);
  const StateProblem p(d, Exponent(0.25), random_field(d->grid(), rng, -5, 5));
  const auto sol = solve_state(p, tol(1e-10));
  CHECK(pde_residual(sol.y, p.u, p) <= 1e-10);
  CHECK(pde_residual(d->zeros(), d->zeros(), StateProblem(d, Exponent(0.25), d->zeros())) == 0.0);
  Field bumped = sol.y;
  bumped[20] += 1.0;
  CHECK(pde_residual(bumped, p.u, p) > 1e-10);
}

TEST_CASE("manufactured sine instance converges at second order") {
  const Exponent a(0.5);
  const auto g = make_grid(1, 64);
  const auto inst = manufactured_instance("sine", g, a);
  // x = 0.5 is node 31: u = π² + 1.
  CHECK(g.coord(31)[0] == 0.5);
  CHECK(inst.u[31] == doctest::Approx(kPi * kPi + 1).epsilon(1e-14));
  StudyTable t;
  for (int n : {32, 64, 128}) {
    const auto d = Discretization::make(1, n);
    const auto m = manufactured_instance("sine", d->grid(), a);
    const auto sol = solve_state(StateProblem(d, a, m.u), tol(1e-11));
    t.add_row({d->grid().spacing(), (sol.y - m.y_exact).max_abs()});
  }
  CHECK(loglog_slope(t) >= 1.8);
  CHECK_THROWS_AS((void)manufactured_instance("sine", make_grid(2, 8), a), std::invalid_argument);
  CHECK_THROWS_AS((void)manufactured_instance("cosine", g, a), std::invalid_argument);
}

TEST_CASE("plateau instance construction") {
  const Exponent a(0.5);
  const auto g = make_grid(1, 64);
  const auto inst = manufactured_instance("plateau", g, a);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.coord(i)[0] <= 0.5) {
      CHECK(inst.u[i] == 0.0);
      CHECK(inst.y_exact[i] == 0.0);
    } else {
      CHECK(inst.y_exact[i] > 0.0);
    }
  }
}

TEST_CASE("plateau dead zone covers the left half up to a transition layer") {
  // The discrete solution keeps a few positive nodes left of x = ½ whose
  // values fall below any fixed threshold only as h -> 0.
  const Exponent a(0.5);
  for (int n : {64, 128}) {
    const auto d = Discretization::make(1, n);
    const auto inst = manufactured_instance("plateau", d->grid(), a);
    const auto sol = solve_state(StateProblem(d, a, inst.u), tol(1e-11));
    const auto zone = dead_zone(sol.y, *d, default_dead_zone_eps(sol.y));
    const double h = d->grid().spacing();
    for (std::size_t i = 0; i < zone.mask.size(); ++i) {
      const double x = d->grid().coord(i)[0];
      if (x > 0.5) CHECK_FALSE(zone.mask[i]);
      if (x <= 0.5 - 6 * h) CHECK(zone.mask[i]);
    }
  }
}

TEST_CASE("dead zone fractions") {
  const auto g = make_grid(1, 32);
  CHECK(dead_zone(Field(g), 1e-10).fraction == 1.0);
  const Field s = Field::from_function(g, [](double x, double) { return std::sin(kPi * x); });
  CHECK(dead_zone(s, 1e-10).fraction == 0.0);
  CHECK(dead_zone(s, 1e-10).count == 0);
  CHECK_THROWS_AS((void)dead_zone(s, -1.0), std::invalid_argument);
  CHECK(default_dead_zone_eps(3.0 * s) == doctest::Approx(3e-10));
}

TEST_CASE("square symmetries of a constant-control solution") {
  const auto d = Discretization::make(2, 16);
  const auto sol = solve_state(StateProblem(d, Exponent(0.5), Field::constant(d->grid(), 7.0)), tol(1e-12));
  const int k = d->grid().nodes_per_axis();
  double worst = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double v = sol.y[d->grid().index(i, j)];
      const int r = k - 1 - i, s = k - 1 - j;
      for (auto [a, b] : {std::pair{j, i}, {r, j}, {i, s}, {r, s}, {s, r}, {j, r}, {s, i}}) {
        worst = std::max(worst, std::abs(v - sol.y[d->grid().index(a, b)]));
      }
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("solver methods agree") {
  std::mt19937_64 rng(12);
  for (int dim : {1, 2}) {
    const auto d = Discretization::make(dim, dim == 1 ? 24 : 8);
    const StateProblem p(d, Exponent(0.6), random_field(d->grid(), rng, -4, 4));
    const auto a = solve_state(p, tol(1e-11, SolveMethod::accel_prox));
    const auto b = solve_state(p, tol(1e-11, SolveMethod::coord_descent));
    CHECK((a.y - b.y).max_abs() <= 1e-9);
    CHECK(a.report.method == SolveMethod::accel_prox);
    CHECK(b.report.method == SolveMethod::coord_descent);
  }
}

TEST_CASE("energy never increases along accepted iterates") {
  std::mt19937_64 rng(14);
  const auto d = Discretization::make(1, 64);
  const StateProblem p(d, Exponent(0.5), random_field(d->grid(), rng, -10, 10));
  SolveOptions o = tol(1e-10);
  o.record_energy = true;
  const auto sol = solve_state(p, o);
  CHECK(!sol.report.energy_increments.empty());
  for (double inc : sol.report.energy_increments) CHECK(inc <= 0.0);
  CHECK(sol.report.energy_trace.size() == sol.report.energy_increments.size() + 1);
}

TEST_CASE("stability estimate on random pairs") {
  std::mt19937_64 rng(15);
  for (int dim : {1, 2}) {
    const auto d = Discretization::make(dim, dim == 1 ? 32 : 10);
    for (int k = 0; k < 10; ++k) {
      const Exponent a(0.2 + 0.06 * k);
      const Field u1 = random_field(d->grid(), rng, -5, 5);
      const Field u2 = random_field(d->grid(), rng, -5, 5);
      const auto y1 = solve_state(StateProblem(d, a, u1), tol(1e-11)).y;
      const auto y2 = solve_state(StateProblem(d, a, u2), tol(1e-11)).y;
      CHECK(d->h01_norm(y1 - y2) <= (1 + 1e-8) * d->hminus1_norm(u1 - u2));
    }
  }
}

TEST_CASE("comparison principle") {
  std::mt19937_64 rng(16);
  const auto d = Discretization::make(1, 48);
  for (int k = 0; k < 5; ++k) {
    const Field u1 = random_field(d->grid(), rng, -5, 5);
    const Field u2 = u1 + random_field(d->grid(), rng, 0, 2);
    const auto y1 = solve_state(StateProblem(d, Exponent(0.5), u1), tol(1e-12)).y;
    const auto y2 = solve_state(StateProblem(d, Exponent(0.5), u2), tol(1e-12)).y;
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] <= y2[i] + 1e-10);
  }
}

TEST_CASE("variational inequality gap") {
  std::mt19937_64 rng(18);
  const auto d = Discretization::make(1, 32);
  const StateProblem p(d, Exponent(0.5), random_field(d->grid(), rng, -5, 5));
  const auto sol = solve_state(p, tol(1e-12));
  CHECK(vi_gap(sol.y, p.u, sol.y, p) == 0.0);
  for (int k = 0; k < 100; ++k) CHECK(vi_gap(sol.y, p.u, random_field(d->grid(), rng, -2, 2), p) >= -1e-9);

  // A state solving for another control fails the inequality for some v.
  const auto other = solve_state(p.with_control(p.u + Field::constant(d->grid(), 3.0)), tol(1e-12)).y;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    Field v = other + random_field(d->grid(), rng, -0.5, 0.5);
    worst = std::min(worst, vi_gap(other, p.u, v, p));
  }
  CHECK(worst < 0.0);
}

TEST_CASE("solves are reproducible and validate inputs") {
  std::mt19937_64 rng(19);
  const auto d = Discretization::make(1, 40);
  const StateProblem p(d, Exponent(0.5), random_field(d->grid(), rng, -5, 5));
  const auto a = solve_state(p, tol(1e-10));
  const auto b = solve_state(p, tol(1e-10));
  for (std::size_t i = 0; i < a.y.size(); ++i) CHECK(a.y[i] == b.y[i]);

  CHECK_THROWS_AS(StateProblem(d, Exponent(0.5), Field(make_grid(1, 8))), GridMismatch);
  CHECK_THROWS_AS((void)solve_state(p, tol(0.0)), std::invalid_argument);
  SolveOptions few = tol(1e-12);
  few.max_iterations = 5;
  CHECK_THROWS_AS((void)solve_state(p, few), ConvergenceError);
  CHECK(parse_solve_method("coord_descent") == SolveMethod::coord_descent);
  CHECK(to_string(SolveMethod::accel_prox) == "accel_prox");
  CHECK_THROWS_AS((void)parse_solve_method("newton"), std::invalid_argument);
}
