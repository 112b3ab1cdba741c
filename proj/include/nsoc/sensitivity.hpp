#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "nsoc/grid.hpp"
#include "nsoc/scalar_kernel.hpp"
#include "nsoc/state_solver.hpp"
#include "nsoc/study.hpp"

namespace nsoc {

/// Linearization of the control-to-state map at a base state y.
///
/// The discrete weighted space is spanned by the nodal basis functions off
/// the dead zone {|y_i| <= eps}; on those nodes the bilinear form is
///   (v, w)_V = vᵀ A w + Σ M_ii w_i v_i w_i,   w_i = α |y_i|^(α-1),
/// and masked nodes carry homogeneous Dirichlet values.
class SensitivitySystem {
 public:
  SensitivitySystem(std::shared_ptr<const Discretization> disc, Field base_state, Exponent alpha, double eps_dead);

  [[nodiscard]] const Discretization& disc() const noexcept { return *disc_; }
  [[nodiscard]] const std::shared_ptr<const Discretization>& disc_ptr() const noexcept { return disc_; }
  [[nodiscard]] const Field& base_state() const noexcept { return base_; }
  [[nodiscard]] Exponent alpha() const noexcept { return alpha_; }
  [[nodiscard]] double eps_dead() const noexcept { return eps_dead_; }
  [[nodiscard]] const std::vector<bool>& mask() const noexcept { return zone_.mask; }
  [[nodiscard]] const DeadZone& dead_zone() const noexcept { return zone_; }
  /// α|y_i|^(α-1) on kept nodes, 0 on masked ones.
  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
  [[nodiscard]] std::span<const std::size_t> kept() const noexcept { return kept_; }
  /// Weighted operator restricted to the kept nodes.
  [[nodiscard]] const Operator& op() const noexcept { return op_; }
  [[nodiscard]] bool empty() const noexcept { return kept_.empty(); }

  /// Solves (δ, z)_V = Σ_i rhs_i z_i for all z in the discrete weighted space;
  /// rhs is a nodal functional over all interior nodes. Masked entries of the result are 0.
  [[nodiscard]] Field solve(std::span<const double> rhs) const;

  /// (v, w)_V; entries of v and w on masked nodes are ignored.
  [[nodiscard]] double vy_inner(const Field& v, const Field& w) const;

  /// ‖A_V δ - rhs‖₂ over kept nodes, relative to max(1, ‖rhs‖₂).
  [[nodiscard]] double relative_residual(const Field& delta, std::span<const double> rhs) const;

 private:
  std::shared_ptr<const Discretization> disc_;
  Field base_;
  Exponent alpha_;
  double eps_dead_;
  DeadZone zone_;
  std::vector<double> weights_;
  std::vector<std::size_t> kept_;
  Operator op_;
};

/// eps_dead < 0 selects default_dead_zone_eps(y).
[[nodiscard]] SensitivitySystem build_sensitivity(std::shared_ptr<const Discretization> disc, const Field& y,
                                                  Exponent alpha, double eps_dead = -1.0);

/// δ = S'(u) h: A_V δ = (M h) on kept nodes, δ = 0 on the dead zone.
[[nodiscard]] Field apply_S_prime(const SensitivitySystem& sys, const Field& h);

/// State-solve tolerance used for difference quotients.
inline constexpr double kQuotientStateTol = 1e-12;

/// (S(u + τh) - S(u)) / τ from two state solves at kQuotientStateTol.
[[nodiscard]] Field difference_quotient(const StateProblem& problem, const Field& h, double tau);
/// Same, reusing an already computed base state S(u) (also used as warm start).
[[nodiscard]] Field difference_quotient(const StateProblem& problem, const Field& base_state, const Field& h,
                                        double tau);

/// Rows (τ, ‖S(u+τh) - S(u) - τ S'(u)h‖_{H¹₀} / τ). τ list must be positive and strictly decreasing.
[[nodiscard]] StudyTable frechet_remainder_study(const StateProblem& problem, const Field& h,
                                                 std::span<const double> taus, double eps_dead = -1.0);

struct DeadZoneDecay {
  StudyTable table;
  /// Set when the zone has no nodes; the table is then empty.
  bool empty_dead_zone = false;
  /// Fitted log-log slope of the tabulated norms (NaN when it cannot be fitted).
  double slope = 0.0;
};

/// Rows (τ, ‖δ_τ‖_{L^(α+1)(Z)}). Z defaults to the dead zone of S(u) at the default threshold;
/// pass `zone` to use a known zero set instead.
[[nodiscard]] DeadZoneDecay dead_zone_decay_study(const StateProblem& problem, const Field& h,
                                                  std::span<const double> taus,
                                                  const std::optional<std::vector<bool>>& zone = std::nullopt);

/// (Σ_{i∈Z} M_ii |v_i|^q)^(1/q)
[[nodiscard]] double restricted_lq_norm(const Discretization& disc, const Field& v, const std::vector<bool>& zone,
                                        double q);

}  // namespace nsoc
