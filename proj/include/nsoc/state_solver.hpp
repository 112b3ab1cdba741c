#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nsoc/grid.hpp"
#include "nsoc/scalar_kernel.hpp"

namespace nsoc {

/// Discrete state equation A y + M phi(y) = M u on a fixed discretization.
struct StateProblem {
  StateProblem(std::shared_ptr<const Discretization> disc, Exponent alpha, Field u);

  std::shared_ptr<const Discretization> disc;
  Exponent alpha;
  Field u;

  [[nodiscard]] const Grid& grid() const noexcept { return disc->grid(); }
  /// Same discretization and exponent, different right-hand side.
  [[nodiscard]] StateProblem with_control(Field new_u) const;
};

enum class SolveMethod { accel_prox, coord_descent };

[[nodiscard]] std::string_view to_string(SolveMethod method) noexcept;
[[nodiscard]] SolveMethod parse_solve_method(std::string_view name);

struct SolveOptions {
  SolveMethod method = SolveMethod::accel_prox;
  /// Stopping rule on the dual-norm PDE residual.
  double tol = 1e-10;
  long max_iterations = 500000;
  std::optional<Field> initial_guess;
  /// Keep the energy after every accepted accelerated-prox iterate.
  bool record_energy = false;
};

struct SolveReport {
  long iterations = 0;
  double energy = 0.0;
  double residual = 0.0;
  SolveMethod method = SolveMethod::accel_prox;
  double wall_seconds = 0.0;
  long restarts = 0;
  std::vector<double> energy_trace;
  /// E(x_{k+1}) - E(x_k) for every accepted step, computed without forming absolute energies.
  std::vector<double> energy_increments;
  /// Iteration indices (into energy_trace) at which momentum was reset.
  std::vector<long> restart_marks;
};

struct StateSolution {
  Field y;
  SolveReport report;
};

/// E(y) = ½ yᵀAy + Σ M_ii potential(y_i) - (Mu)ᵀy.
[[nodiscard]] double energy(const Field& y, const StateProblem& problem);

/// E(y_new) - E(y), evaluated term by term so that it stays accurate when the
/// two states are close.
[[nodiscard]] double energy_difference(const Field& y_new, const Field& y, const StateProblem& problem);

/// Minimizes the energy, stopping once pde_residual <= tol.
/// Throws ConvergenceError when the iteration budget runs out.
[[nodiscard]] StateSolution solve_state(const StateProblem& problem, const SolveOptions& options = {});

/// Nodal residual A y + M phi(y) - M u.
[[nodiscard]] std::vector<double> residual_vector(const Field& y, const Field& u, const StateProblem& problem);

/// Dual norm sqrt(rᵀA⁻¹r) of the residual.
[[nodiscard]] double pde_residual(const Field& y, const Field& u, const StateProblem& problem);

/// yᵀA(v - y) + Σ M_ii (potential(v_i) - potential(y_i)) - (Mu)ᵀ(v - y); nonnegative for all v iff y solves.
[[nodiscard]] double vi_gap(const Field& y, const Field& u, const Field& v, const StateProblem& problem);

struct DeadZone {
  std::vector<bool> mask;
  double fraction = 0.0;
  std::size_t count = 0;
};

/// mask_i = |y_i| <= eps; fraction is the masked share of the lumped measure.
[[nodiscard]] DeadZone dead_zone(const Field& y, double eps);
[[nodiscard]] DeadZone dead_zone(const Field& y, const Discretization& disc, double eps);

/// 1e-10 * max(1, ‖y‖∞)
[[nodiscard]] double default_dead_zone_eps(const Field& y) noexcept;

struct ManufacturedInstance {
  Field u;
  Field y_exact;
};

/// "sine": y* = sin(πx); "plateau": y* = 256 (x-½)₊⁴ (1-x)⁴ with an exact dead zone on [0, ½].
/// 1D grids only.
[[nodiscard]] ManufacturedInstance manufactured_instance(std::string_view name, const Grid& grid, Exponent alpha);

}  // namespace nsoc
