#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "nsoc/grid.hpp"
#include "nsoc/scalar_kernel.hpp"
#include "nsoc/sensitivity.hpp"
#include "nsoc/state_solver.hpp"
#include "nsoc/study.hpp"

namespace nsoc {

/// Tracking problem  min ½‖y - y_D‖² + (ν/2)‖u‖²  s.t.  y = S(u),  u_a <= u <= u_b.
/// Bounds may be ±inf.
struct ControlProblem {
  ControlProblem(std::shared_ptr<const Discretization> disc, Exponent alpha, Field target, double nu,
                 std::vector<double> lower, std::vector<double> upper);
  /// Constant bounds.
  ControlProblem(std::shared_ptr<const Discretization> disc, Exponent alpha, Field target, double nu, double lower,
                 double upper);

  std::shared_ptr<const Discretization> disc;
  Exponent alpha;
  Field target;
  double nu;
  std::vector<double> lower;
  std::vector<double> upper;
  /// Negative selects the relative default threshold of the state.
  double eps_dead = -1.0;
  double state_tol = 1e-12;

  [[nodiscard]] StateProblem state_problem(const Field& u) const;
};

struct ObjectiveValue {
  double value = 0.0;
  Field dJ_dy;  ///< y - y_D (nodal representative)
  Field dJ_du;  ///< ν u
};

[[nodiscard]] ObjectiveValue objective(const Field& y, const Field& u, const ControlProblem& cp);

/// Adjoint in the weighted space: A_V p = M dJ_dy on kept nodes, p = 0 on the dead zone.
[[nodiscard]] Field solve_adjoint(const SensitivitySystem& sys, const Field& dJ_dy);

/// Everything computed along u -> y -> S'(u) -> p -> g = p + ν u.
struct ReducedGradient {
  Field g;
  Field p;
  Field y;
  SensitivitySystem sys;
  double objective = 0.0;
  double state_residual = 0.0;
};

[[nodiscard]] ReducedGradient reduced_gradient(const Field& u, const ControlProblem& cp);

/// Nodewise median(u_a, u, u_b).
[[nodiscard]] Field project_box(const Field& u, const ControlProblem& cp);

struct OptimizeHistory {
  std::vector<double> objective;
  std::vector<double> kkt_residual;
  std::vector<double> step;
  long iterations = 0;
  void write(std::ostream& out) const;
  void write(const std::string& path) const;
};

struct OptimizeResult {
  Field u;
  OptimizeHistory history;
  bool converged = false;
};

/// Projected gradient with Armijo backtracking (factor ½, sufficient decrease 1e-4,
/// initial trial step 1/ν), stopped once kkt_residual <= tol. On iteration-limit
/// exhaustion the best iterate is returned with converged = false.
[[nodiscard]] OptimizeResult projected_gradient_solve(const ControlProblem& cp, const Field& u0, double tol,
                                                      long max_iter);

struct KktResidual {
  /// ‖u - P(u - (p + νu))‖_{L²}
  double residual = 0.0;
  /// Dual-norm residual of the state equation.
  double state_residual = 0.0;
  /// Relative residual of the adjoint system on kept nodes.
  double adjoint_residual = 0.0;
  /// ‖u - max(u_a, min(u_b, -p/ν))‖_{L²}
  double projection_residual = 0.0;
};

[[nodiscard]] KktResidual kkt_residual(const Field& u, const ControlProblem& cp);
[[nodiscard]] KktResidual kkt_residual(const Field& u, const ControlProblem& cp, const ReducedGradient& rg);

/// min over sampled admissible v of ⟨dJ_dy, S'(u)(v - u)⟩ + (ν u, v - u)_{L²}.
/// Samples: `sample_count` seeded uniform draws in the box plus the 2m single-node
/// moves to u_a and u_b. Infinite bounds are replaced by u ∓ 1 for sampling.
[[nodiscard]] double bouligand_gap(const Field& u, const ControlProblem& cp, int sample_count, std::uint64_t seed);

/// Rows (k, ‖p_k‖²_{H¹₀}, (p_k, p_k)_V, (dJ_dy, p_k)_{L²}) for p_k = p - clamp(p, -k, k).
[[nodiscard]] StudyTable stampacchia_truncation_check(const Field& p, const Field& dJ_dy, const SensitivitySystem& sys,
                                                      std::span<const double> ks);

/// True when every row satisfies col1 <= col2 <= col3 up to rtol relative slack.
[[nodiscard]] bool truncation_chain_holds(const StudyTable& table, double rtol);

/// Lebesgue exponents available to the adjoint when ∂_yJ ∈ L^s in dimension d.
/// Requires max(1, 2d/(d+2)) < s (s = +inf allowed).
[[nodiscard]] Interval admissible_adjoint_exponents(double s, int d);

}  // namespace nsoc
