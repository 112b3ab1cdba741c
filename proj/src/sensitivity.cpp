#include "nsoc/sensitivity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nsoc/errors.hpp"
#include "nsoc/linsolve.hpp"

namespace nsoc {

SensitivitySystem::SensitivitySystem(std::shared_ptr<const Discretization> disc, Field base_state, Exponent alpha,
                                     double eps_dead)
    : disc_(std::move(disc)), base_(std::move(base_state)), alpha_(alpha), eps_dead_(eps_dead) {
  if (!disc_) throw std::invalid_argument("SensitivitySystem needs a discretization");
  if (!(base_.grid() == disc_->grid())) throw GridMismatch("base state does not live on the discretization grid");
  if (!(eps_dead_ >= 0.0)) throw std::invalid_argument("dead-zone threshold must be nonnegative");

  zone_ = nsoc::dead_zone(base_, *disc_, eps_dead_);
  const auto mass = disc_->mass();
  weights_.assign(base_.size(), 0.0);
  std::vector<double> added;
  for (std::size_t i = 0; i < base_.size(); ++i) {
    if (zone_.mask[i]) continue;
    weights_[i] = phi_slope(base_[i], alpha_);
    kept_.push_back(i);
    added.push_back(mass[i] * weights_[i]);
  }
  op_ = disc_->stiffness().restricted(kept_).plus_diagonal(added, true);
}

Field SensitivitySystem::solve(std::span<const double> rhs) const {
  if (rhs.size() != base_.size()) throw GridMismatch("right-hand side size does not match the grid");
  Field out(base_.grid());
  if (kept_.empty()) return out;

  std::vector<double> b(kept_.size());
  double scale = 0.0;
  for (std::size_t r = 0; r < kept_.size(); ++r) {
    b[r] = rhs[kept_[r]];
    scale = std::max(scale, std::abs(b[r]));
  }
  if (scale == 0.0) return out;
  for (double& v : b) v /= scale;
  const auto sol = conjugate_gradient(op_, b, 1e-12);
  for (std::size_t r = 0; r < kept_.size(); ++r) out[kept_[r]] = scale * sol.x[r];
  return out;
}

double SensitivitySystem::vy_inner(const Field& v, const Field& w) const {
  require_same_grid(v, base_);
  require_same_grid(w, base_);
  std::vector<double> vr(kept_.size()), wr(kept_.size());
  for (std::size_t r = 0; r < kept_.size(); ++r) {
    vr[r] = v[kept_[r]];
    wr[r] = w[kept_[r]];
  }
  return op_.quadratic_form(vr, wr);
}

double SensitivitySystem::relative_residual(const Field& delta, std::span<const double> rhs) const {
  require_same_grid(delta, base_);
  std::vector<double> dr(kept_.size());
  for (std::size_t r = 0; r < kept_.size(); ++r) dr[r] = delta[kept_[r]];
  const auto ad = op_.apply(dr);
  double res = 0.0;
  double nb = 0.0;
  for (std::size_t r = 0; r < kept_.size(); ++r) {
    const double b = rhs[kept_[r]];
    res += (ad[r] - b) * (ad[r] - b);
    nb += b * b;
  }
  return std::sqrt(res) / std::max(1.0, std::sqrt(nb));
}

SensitivitySystem build_sensitivity(std::shared_ptr<const Discretization> disc, const Field& y, Exponent alpha,
                                    double eps_dead) {
  const double eps = eps_dead < 0.0 ? default_dead_zone_eps(y) : eps_dead;
  return SensitivitySystem(std::move(disc), y, alpha, eps);
}

Field apply_S_prime(const SensitivitySystem& sys, const Field& h) {
  require_same_grid(h, sys.base_state());
  return sys.solve(sys.disc().mass_times(h));
}

// ---------------------------------------------------------------------------

Field difference_quotient(const StateProblem& problem, const Field& base_state, const Field& h, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("difference_quotient: tau must be positive");
  require_same_grid(h, problem.u);
  Field shifted = problem.u;
  shifted.axpy(tau, h);
  SolveOptions opts;
  opts.tol = kQuotientStateTol;
  opts.initial_guess = base_state;
  const auto perturbed = solve_state(problem.with_control(std::move(shifted)), opts);
  Field q = perturbed.y - base_state;
  q *= 1.0 / tau;
  return q;
}

Field difference_quotient(const StateProblem& problem, const Field& h, double tau) {
  SolveOptions opts;
  opts.tol = kQuotientStateTol;
  const auto base = solve_state(problem, opts);
  return difference_quotient(problem, base.y, h, tau);
}

namespace {

void check_tau_list(std::span<const double> taus) {
  if (taus.empty()) throw std::invalid_argument("tau list is empty");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0)) throw std::invalid_argument("tau values must be positive");
    if (i > 0 && !(taus[i] < taus[i - 1])) throw std::invalid_argument("tau list must be strictly decreasing");
  }
}

}  // namespace

StudyTable frechet_remainder_study(const StateProblem& problem, const Field& h, std::span<const double> taus,
                                   double eps_dead) {
  check_tau_list(taus);
  SolveOptions opts;
  opts.tol = kQuotientStateTol;
  const auto base = solve_state(problem, opts);
  const auto sys = build_sensitivity(problem.disc, base.y, problem.alpha, eps_dead);
  const Field derivative = apply_S_prime(sys, h);

  StudyTable table;
  for (double tau : taus) {
    Field remainder = difference_quotient(problem, base.y, h, tau);
    remainder -= derivative;
    table.add_row({tau, problem.disc->h01_norm(remainder)});
  }
  return table;
}

double restricted_lq_norm(const Discretization& disc, const Field& v, const std::vector<bool>& zone, double q) {
  if (zone.size() != v.size()) throw GridMismatch("zone mask size does not match the field");
  const auto mass = disc.mass();
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (zone[i]) s += mass[i] * std::pow(std::abs(v[i]), q);
  }
  return std::pow(s, 1.0 / q);
}

DeadZoneDecay dead_zone_decay_study(const StateProblem& problem, const Field& h, std::span<const double> taus,
                                    const std::optional<std::vector<bool>>& zone) {
  check_tau_list(taus);
  SolveOptions opts;
  opts.tol = kQuotientStateTol;
  const auto base = solve_state(problem, opts);
  const std::vector<bool> z = zone ? *zone : dead_zone(base.y, *problem.disc, default_dead_zone_eps(base.y)).mask;
  if (z.size() != base.y.size()) throw GridMismatch("zone mask size does not match the grid");

  DeadZoneDecay out;
  bool any = false;
  for (bool b : z) any = any || b;
  if (!any) {
    out.empty_dead_zone = true;
    out.slope = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double q = problem.alpha.value() + 1.0;
  for (double tau : taus) {
    const Field quotient = difference_quotient(problem, base.y, h, tau);
    out.table.add_row({tau, restricted_lq_norm(*problem.disc, quotient, z, q)});
  }
  try {
    out.slope = loglog_slope(out.table);
  } catch (const std::invalid_argument&) {
    out.slope = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace nsoc
