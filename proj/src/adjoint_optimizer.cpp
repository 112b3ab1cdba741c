#include "nsoc/adjoint_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "nsoc/errors.hpp"

namespace nsoc {

ControlProblem::ControlProblem(std::shared_ptr<const Discretization> d, Exponent a, Field y_d, double tikhonov,
                               std::vector<double> lo, std::vector<double> hi)
    : disc(std::move(d)), alpha(a), target(std::move(y_d)), nu(tikhonov), lower(std::move(lo)), upper(std::move(hi)) {
  if (!disc) throw std::invalid_argument("ControlProblem needs a discretization");
  if (!(target.grid() == disc->grid())) throw GridMismatch("target does not live on the problem grid");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("Tikhonov parameter nu must be positive");
  const std::size_t m = disc->grid().size();
  if (lower.size() != m || upper.size() != m) throw GridMismatch("bound vectors do not match the grid");
  for (std::size_t i = 0; i < m; ++i) {
    const bool bad_lower = std::isnan(lower[i]) || (std::isinf(lower[i]) && lower[i] > 0.0);
    const bool bad_upper = std::isnan(upper[i]) || (std::isinf(upper[i]) && upper[i] < 0.0);
    if (bad_lower || bad_upper || lower[i] > upper[i]) {
      throw std::invalid_argument("box bounds must satisfy u_a <= u_b at every node");
    }
  }
}

ControlProblem::ControlProblem(std::shared_ptr<const Discretization> d, Exponent a, Field y_d, double tikhonov,
                               double lo, double hi)
    : ControlProblem(d, a, std::move(y_d), tikhonov, std::vector<double>(d ? d->grid().size() : 0, lo),
                     std::vector<double>(d ? d->grid().size() : 0, hi)) {}

StateProblem ControlProblem::state_problem(const Field& u) const { return StateProblem(disc, alpha, u); }

ObjectiveValue objective(const Field& y, const Field& u, const ControlProblem& cp) {
  require_same_grid(y, cp.target);
  require_same_grid(u, cp.target);
  const Discretization& d = *cp.disc;
  ObjectiveValue out{0.0, y - cp.target, cp.nu * u};
  out.value = 0.5 * d.l2_inner(out.dJ_dy, out.dJ_dy) + 0.5 * cp.nu * d.l2_inner(u, u);
  return out;
}

Field solve_adjoint(const SensitivitySystem& sys, const Field& dJ_dy) {
  require_same_grid(dJ_dy, sys.base_state());
  return sys.solve(sys.disc().mass_times(dJ_dy));
}

namespace {

StateSolution solve_for(const Field& u, const ControlProblem& cp, const Field* warm) {
  SolveOptions opts;
  opts.tol = cp.state_tol;
  if (warm) opts.initial_guess = *warm;
  return solve_state(cp.state_problem(u), opts);
}

ReducedGradient gradient_at(const Field& u, const ControlProblem& cp, const Field* warm) {
  auto state = solve_for(u, cp, warm);
  auto sys = build_sensitivity(cp.disc, state.y, cp.alpha, cp.eps_dead);
  const auto obj = objective(state.y, u, cp);
  Field p = solve_adjoint(sys, obj.dJ_dy);
  Field g = p + obj.dJ_du;
  return ReducedGradient{std::move(g), std::move(p), std::move(state.y), std::move(sys), obj.value,
                         state.report.residual};
}

double project_value(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

Field project(const Field& u, const ControlProblem& cp) {
  Field out = u;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = project_value(u[i], cp.lower[i], cp.upper[i]);
  return out;
}

// J(u_new) - J(u) from increments, so that small decreases are not lost to cancellation.
double objective_difference(const ReducedGradient& now, const Field& u_now, const ReducedGradient& next,
                            const Field& u_next, const ControlProblem& cp) {
  const auto mass = cp.disc->mass();
  double diff = 0.0;
  for (std::size_t i = 0; i < u_now.size(); ++i) {
    const double dy = next.y[i] - now.y[i];
    const double du = u_next[i] - u_now[i];
    diff += mass[i] * (0.5 * dy * (next.y[i] + now.y[i] - 2.0 * cp.target[i]) +
                       0.5 * cp.nu * du * (u_next[i] + u_now[i]));
  }
  return diff;
}

double stationarity_residual(const Field& u, const Field& g, const ControlProblem& cp) {
  Field r = u;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = u[i] - project_value(u[i] - g[i], cp.lower[i], cp.upper[i]);
  return std::sqrt(cp.disc->l2_inner(r, r));
}

}  // namespace

ReducedGradient reduced_gradient(const Field& u, const ControlProblem& cp) {
  require_same_grid(u, cp.target);
  return gradient_at(u, cp, nullptr);
}

Field project_box(const Field& u, const ControlProblem& cp) {
  require_same_grid(u, cp.target);
  return project(u, cp);
}

KktResidual kkt_residual(const Field& u, const ControlProblem& cp, const ReducedGradient& rg) {
  KktResidual out;
  out.residual = stationarity_residual(u, rg.g, cp);
  out.state_residual = rg.state_residual;
  const Field dJ_dy = rg.y - cp.target;
  out.adjoint_residual = rg.sys.relative_residual(rg.p, cp.disc->mass_times(dJ_dy));
  Field r = u;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = u[i] - project_value(-rg.p[i] / cp.nu, cp.lower[i], cp.upper[i]);
  }
  out.projection_residual = std::sqrt(cp.disc->l2_inner(r, r));
  return out;
}

KktResidual kkt_residual(const Field& u, const ControlProblem& cp) {
  return kkt_residual(u, cp, reduced_gradient(u, cp));
}

void OptimizeHistory::write(std::ostream& out) const {
  out << "iter,objective,kkt_residual,step\n";
  char buf[128];
  for (std::size_t k = 0; k < objective.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, objective[k], kkt_residual[k], step[k]);
    out << buf;
  }
}

void OptimizeHistory::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

OptimizeResult projected_gradient_solve(const ControlProblem& cp, const Field& u0, double tol, long max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("projected_gradient_solve: tol must be positive");
  if (max_iter < 0) throw std::invalid_argument("projected_gradient_solve: max_iter must be nonnegative");
  require_same_grid(u0, cp.target);

  constexpr double kShrink = 0.5;
  constexpr double kSufficientDecrease = 1e-4;
  constexpr int kMaxBacktracks = 60;

  OptimizeResult out{project(u0, cp), {}, false};
  ReducedGradient current = gradient_at(out.u, cp, nullptr);
  double last_step = 0.0;

  for (long iter = 0;; ++iter) {
    const double kkt = stationarity_residual(out.u, current.g, cp);
    out.history.objective.push_back(current.objective);
    out.history.kkt_residual.push_back(kkt);
    out.history.step.push_back(last_step);
    out.history.iterations = iter;
    if (kkt <= tol) {
      out.converged = true;
      return out;
    }
    if (iter >= max_iter) return out;

    bool accepted = false;
    double step = 1.0 / cp.nu;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, step *= kShrink) {
      Field trial = out.u;
      trial.axpy(-step, current.g);
      trial = project(trial, cp);
      const Field du = trial - out.u;
      const double slope = cp.disc->l2_inner(current.g, du);
      if (!(slope < 0.0)) continue;
      ReducedGradient next = gradient_at(trial, cp, &current.y);
      if (objective_difference(current, out.u, next, trial, cp) <= kSufficientDecrease * slope) {
        out.u = std::move(trial);
        current = std::move(next);
        last_step = step;
        accepted = true;
        break;
      }
    }
    // No step passes the Armijo test: the iterate is stationary to working precision.
    if (!accepted) return out;
  }
}

double bouligand_gap(const Field& u, const ControlProblem& cp, int sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw std::invalid_argument("bouligand_gap: sample_count must be >= 1");
  require_same_grid(u, cp.target);
  const Discretization& d = *cp.disc;
  const auto state = solve_for(u, cp, nullptr);
  const auto sys = build_sensitivity(cp.disc, state.y, cp.alpha, cp.eps_dead);
  const Field dJ_dy = state.y - cp.target;
  const auto m_dj = d.mass_times(dJ_dy);

  const std::size_t m = u.size();
  const auto lo_at = [&](std::size_t i) { return std::isfinite(cp.lower[i]) ? cp.lower[i] : u[i] - 1.0; };
  const auto hi_at = [&](std::size_t i) { return std::isfinite(cp.upper[i]) ? cp.upper[i] : u[i] + 1.0; };

  const auto evaluate = [&](const Field& v) {
    const Field dir = v - u;
    const Field delta = apply_S_prime(sys, dir);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += m_dj[i] * delta[i];
    return s + cp.nu * d.l2_inner(u, dir);
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < sample_count; ++k) {
    Field v(u.grid());
    for (std::size_t i = 0; i < m; ++i) {
      const double lo = lo_at(i);
      const double hi = hi_at(i);
      v[i] = lo + (hi - lo) * unit(rng);
    }
    gap = std::min(gap, evaluate(v));
  }
  for (std::size_t i = 0; i < m; ++i) {
    Field v = u;
    v[i] = lo_at(i);
    gap = std::min(gap, evaluate(v));
    v[i] = hi_at(i);
    gap = std::min(gap, evaluate(v));
  }
  return gap;
}

StudyTable stampacchia_truncation_check(const Field& p, const Field& dJ_dy, const SensitivitySystem& sys,
                                        std::span<const double> ks) {
  require_same_grid(p, sys.base_state());
  require_same_grid(dJ_dy, sys.base_state());
  const Discretization& d = sys.disc();
  StudyTable table;
  table.columns = {"k", "h01_sq", "vy_sq", "rhs"};
  for (double k : ks) {
    if (!(k >= 0.0)) throw std::invalid_argument("truncation levels must be nonnegative");
    Field pk = p;
    for (std::size_t i = 0; i < pk.size(); ++i) pk[i] = p[i] - std::min(k, std::max(-k, p[i]));
    table.add_row({k, d.h01_inner(pk, pk), sys.vy_inner(pk, pk), d.l2_inner(dJ_dy, pk)});
  }
  return table;
}

bool truncation_chain_holds(const StudyTable& table, double rtol) {
  for (const auto& r : table.rows) {
    const double scale = std::max({std::abs(r[1]), std::abs(r[2]), std::abs(r[3])});
    if (r[1] > r[2] + rtol * scale || r[2] > r[3] + rtol * scale) return false;
  }
  return true;
}

Interval admissible_adjoint_exponents(double s, int d) {
  if (d < 1) throw std::invalid_argument("admissible_adjoint_exponents: dimension must be >= 1");
  const double dd = d;
  const double floor = std::max(1.0, 2.0 * dd / (dd + 2.0));
  if (!(s > floor)) {
    throw std::invalid_argument("admissible_adjoint_exponents: s must exceed max(1, 2d/(d+2))");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double half = dd / 2.0;
  if (s > half) return {1.0, true, inf, true};
  if (s == half) return {1.0, true, inf, false};
  return {1.0, true, 1.0 / (1.0 / s - 2.0 / dd), false};
}

}  // namespace nsoc
