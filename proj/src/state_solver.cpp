#include "nsoc/state_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nsoc/errors.hpp"
#include "nsoc/linsolve.hpp"

namespace nsoc {

StateProblem::StateProblem(std::shared_ptr<const Discretization> d, Exponent a, Field control)
    : disc(std::move(d)), alpha(a), u(std::move(control)) {
  if (!disc) throw std::invalid_argument("StateProblem needs a discretization");
  if (!(u.grid() == disc->grid())) throw GridMismatch("control does not live on the problem grid");
  if (!u.all_finite()) throw std::invalid_argument("control has non-finite entries");
}

StateProblem StateProblem::with_control(Field new_u) const { return StateProblem(disc, alpha, std::move(new_u)); }

std::string_view to_string(SolveMethod method) noexcept {
  return method == SolveMethod::accel_prox ? "accel_prox" : "coord_descent";
}

SolveMethod parse_solve_method(std::string_view name) {
  if (name == "accel_prox") return SolveMethod::accel_prox;
  if (name == "coord_descent") return SolveMethod::coord_descent;
  throw std::invalid_argument("unknown solve method '" + std::string(name) + "'");
}

double energy(const Field& y, const StateProblem& problem) {
  const Discretization& d = *problem.disc;
  if (!(y.grid() == d.grid())) throw GridMismatch("state does not live on the problem grid");
  const auto mass = d.mass();
  const auto ay = d.stiffness().apply(y.values());
  double e = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    e += 0.5 * y[i] * ay[i] + mass[i] * (potential(y[i], problem.alpha) - problem.u[i] * y[i]);
  }
  return e;
}

std::vector<double> residual_vector(const Field& y, const Field& u, const StateProblem& problem) {
  const Discretization& d = *problem.disc;
  require_same_grid(y, u);
  if (!(y.grid() == d.grid())) throw GridMismatch("state does not live on the problem grid");
  const auto mass = d.mass();
  auto r = d.stiffness().apply(y.values());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += mass[i] * (phi(y[i], problem.alpha) - u[i]);
  return r;
}

double pde_residual(const Field& y, const Field& u, const StateProblem& problem) {
  return problem.disc->dual_norm(residual_vector(y, u, problem));
}

double vi_gap(const Field& y, const Field& u, const Field& v, const StateProblem& problem) {
  const Discretization& d = *problem.disc;
  require_same_grid(y, u);
  require_same_grid(y, v);
  const auto mass = d.mass();
  const Field diff = v - y;
  const auto ay = d.stiffness().apply(y.values());
  double gap = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    gap += ay[i] * diff[i] +
           mass[i] * (potential(v[i], problem.alpha) - potential(y[i], problem.alpha) - u[i] * diff[i]);
  }
  return gap;
}

DeadZone dead_zone(const Field& y, const Discretization& disc, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("dead_zone: eps must be nonnegative");
  if (!(y.grid() == disc.grid())) throw GridMismatch("state does not live on the discretization grid");
  DeadZone z;
  z.mask.assign(y.size(), false);
  const auto mass = disc.mass();
  double total = 0.0;
  double masked = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    total += mass[i];
    if (std::abs(y[i]) <= eps) {
      z.mask[i] = true;
      masked += mass[i];
      ++z.count;
    }
  }
  z.fraction = total > 0.0 ? masked / total : 0.0;
  return z;
}

DeadZone dead_zone(const Field& y, double eps) { return dead_zone(y, Discretization(y.grid()), eps); }

double default_dead_zone_eps(const Field& y) noexcept { return 1e-10 * std::max(1.0, y.max_abs()); }

double energy_difference(const Field& y_new, const Field& y, const StateProblem& problem) {
  const Discretization& d = *problem.disc;
  require_same_grid(y_new, y);
  if (!(y.grid() == d.grid())) throw GridMismatch("state does not live on the problem grid");
  const auto mass = d.mass();
  const Field dy = y_new - y;
  const auto ay = d.stiffness().apply(y.values());
  const auto ady = d.stiffness().apply(dy.values());
  double diff = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    diff += dy[i] * (ay[i] + 0.5 * ady[i] - mass[i] * problem.u[i]) +
            mass[i] * potential_increment(y[i], y_new[i], problem.alpha);
  }
  return diff;
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Residual test with closed-form spectral bounds, falling back to the exact
// dual norm only when ‖r‖²/λmax <= tol² < ‖r‖²/λmin.
class ResidualGate {
 public:
  ResidualGate(const StateProblem& problem, double tol) : problem_(problem), tol_(tol) {}

  /// Returns the exact dual norm when it was computed, a bound otherwise.
  struct Verdict {
    bool converged;
    double estimate;
  };

  Verdict check(const Field& y) const {
    const auto r = residual_vector(y, problem_.u, problem_);
    double rr = 0.0;
    for (double v : r) rr += v * v;
    const auto& spec = problem_.disc->spectrum();
    const double upper = std::sqrt(rr / spec.lambda_min);
    if (upper <= tol_) return {true, upper};
    const double lower = std::sqrt(rr / spec.lambda_max);
    if (lower > tol_) return {false, lower};
    const double exact = problem_.disc->dual_norm(r);
    return {exact <= tol_, exact};
  }

 private:
  const StateProblem& problem_;
  double tol_;
};

Field initial_state(const StateProblem& problem, const SolveOptions& options) {
  if (!options.initial_guess) return problem.disc->zeros();
  if (!(options.initial_guess->grid() == problem.grid())) throw GridMismatch("initial guess grid mismatch");
  return *options.initial_guess;
}

StateSolution solve_accel_prox(const StateProblem& problem, const SolveOptions& options) {
  const auto start = Clock::now();
  const Discretization& d = *problem.disc;
  const Operator& A = d.stiffness();
  const auto mass = d.mass();
  const std::size_t m = d.grid().size();

  // Gradient Lipschitz constant is λmax(A), known in closed form on the uniform grid.
  const double step = 1.0 / d.spectrum().lambda_max;
  std::vector<double> prox_t(m);
  for (std::size_t i = 0; i < m; ++i) prox_t[i] = step * mass[i];

  const ResidualGate gate(problem, options.tol);
  StateSolution sol{initial_state(problem, options), {}};
  sol.report.method = SolveMethod::accel_prox;
  Field& x = sol.y;
  // Absolute energies cannot resolve decreases once the residual nears
  // sqrt(machine epsilon); accept/restart decisions use the increment instead.
  double ex = energy(x, problem);
  if (options.record_energy) sol.report.energy_trace.push_back(ex);

  Field z = x;
  Field x_new(d.grid());
  std::vector<double> az(m);
  std::vector<double> ax = A.apply(x.values());
  std::vector<double> dx(m);
  std::vector<double> adx(m);
  double theta = 1.0;
  long stalled = 0;

  // Leaves x_new, dx = x_new - x and adx = A dx; returns E(x_new) - E(x).
  const auto prox_step = [&](const Field& from, std::span<const double> afrom) {
    for (std::size_t i = 0; i < m; ++i) {
      const double grad = afrom[i] - mass[i] * problem.u[i];
      x_new[i] = prox_potential(from[i] - step * grad, prox_t[i], problem.alpha);
      dx[i] = x_new[i] - x[i];
    }
    A.apply(dx, adx);
    double diff = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      diff += dx[i] * (ax[i] + 0.5 * adx[i] - mass[i] * problem.u[i]) +
              mass[i] * potential_increment(x[i], x_new[i], problem.alpha);
    }
    return diff;
  };

  for (long k = 0;; ++k) {
    if (k % 10 == 0) {
      A.apply(x.values(), ax);  // drop drift from the incremental update
      const auto verdict = gate.check(x);
      if (verdict.converged) {
        sol.report.iterations = k;
        break;
      }
      if (k >= options.max_iterations || stalled > 50) {
        throw ConvergenceError(stalled > 50 ? "accelerated prox stagnated above the residual tolerance"
                                            : "accelerated prox hit the iteration limit",
                               k, verdict.estimate);
      }
    }

    A.apply(z.values(), az);
    double decrease = prox_step(z, az);
    if (decrease > 0.0) {
      // Function-value restart: drop momentum and take a plain step from x.
      theta = 1.0;
      z = x;
      ++sol.report.restarts;
      if (options.record_energy) {
        sol.report.restart_marks.push_back(static_cast<long>(sol.report.energy_trace.size()) - 1);
      }
      decrease = prox_step(x, ax);
      if (decrease > 0.0) {
        ++stalled;
        continue;
      }
    }
    stalled = 0;
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    const double momentum = (theta - 1.0) / theta_next;
    for (std::size_t i = 0; i < m; ++i) {
      z[i] = x_new[i] + momentum * dx[i];
      ax[i] += adx[i];
    }
    std::swap(x, x_new);
    ex += decrease;
    theta = theta_next;
    if (options.record_energy) {
      sol.report.energy_trace.push_back(ex);
      sol.report.energy_increments.push_back(decrease);
    }
  }

  sol.report.energy = ex;
  sol.report.residual = pde_residual(x, problem.u, problem);
  sol.report.wall_seconds = seconds_since(start);
  return sol;
}

StateSolution solve_coord_descent(const StateProblem& problem, const SolveOptions& options) {
  const auto start = Clock::now();
  const Discretization& d = *problem.disc;
  const Operator& A = d.stiffness();
  const auto mass = d.mass();
  const auto ptr = A.row_ptr();
  const auto cols = A.cols();
  const auto vals = A.vals();
  const std::size_t m = d.grid().size();
  const auto diag = A.diagonal_entries();

  const ResidualGate gate(problem, options.tol);
  StateSolution sol{initial_state(problem, options), {}};
  sol.report.method = SolveMethod::coord_descent;
  Field& y = sol.y;

  for (long sweep = 0;; ++sweep) {
    const auto verdict = gate.check(y);
    if (verdict.converged) {
      sol.report.iterations = sweep;
      break;
    }
    if (sweep >= options.max_iterations) {
      throw ConvergenceError("coordinate descent hit the sweep limit", sweep, verdict.estimate);
    }
    // Node update solves A_ii y_i + M_ii phi(y_i) = M_ii u_i - Σ_{j≠i} A_ij y_j exactly.
    for (std::size_t i = 0; i < m; ++i) {
      double rhs = mass[i] * problem.u[i];
      for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) {
        if (cols[k] != i) rhs -= vals[k] * y[cols[k]];
      }
      y[i] = prox_potential(rhs / diag[i], mass[i] / diag[i], problem.alpha);
    }
  }

  sol.report.energy = energy(y, problem);
  sol.report.residual = pde_residual(y, problem.u, problem);
  sol.report.wall_seconds = seconds_since(start);
  return sol;
}

}  // namespace

StateSolution solve_state(const StateProblem& problem, const SolveOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("solve_state: tol must be positive");
  return options.method == SolveMethod::accel_prox ? solve_accel_prox(problem, options)
                                                   : solve_coord_descent(problem, options);
}

// ---------------------------------------------------------------------------

ManufacturedInstance manufactured_instance(std::string_view name, const Grid& grid, Exponent alpha) {
  if (grid.dim() != 1) throw std::invalid_argument("manufactured instances are defined on 1D grids");
  const double a = alpha.value();
  constexpr double pi = std::numbers::pi;

  if (name == "sine") {
    auto y = Field::from_function(grid, [](double x, double) { return std::sin(pi * x); });
    auto u = Field::from_function(grid, [a](double x, double) {
      const double s = std::sin(pi * x);
      return pi * pi * s + abs_pow(s, a);
    });
    return {std::move(u), std::move(y)};
  }
  if (name == "plateau") {
    // y* = 256 p⁴ q⁴ with p = x - ½, q = 1 - x on (½, 1);
    // y*'' = 1024 (3 p² q² (q - p)² - 2 p³ q³).
    const auto exact = [](double x) {
      if (x <= 0.5) return 0.0;
      const double p = x - 0.5;
      const double q = 1.0 - x;
      return 256.0 * std::pow(p * q, 4);
    };
    const auto second = [](double x) {
      if (x <= 0.5) return 0.0;
      const double p = x - 0.5;
      const double q = 1.0 - x;
      return 1024.0 * (3.0 * p * p * q * q * (q - p) * (q - p) - 2.0 * p * p * p * q * q * q);
    };
    auto y = Field::from_function(grid, [&](double x, double) { return exact(x); });
    auto u = Field::from_function(grid, [&](double x, double) {
      if (x <= 0.5) return 0.0;
      return -second(x) + abs_pow(exact(x), a);
    });
    return {std::move(u), std::move(y)};
  }
  throw std::invalid_argument("unknown manufactured instance '" + std::string(name) + "'");
}

}  // namespace nsoc
