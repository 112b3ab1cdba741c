#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nsoc {

/// Outcome of one certified property.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteOptions {
  std::uint64_t seed = 20240611;
  /// Shrinks sample counts for smoke runs; thresholds are unchanged.
  bool quick = false;
};

// Each check runs one property at the thresholds fixed below and never throws;
// solver failures are reported as a failed check.

/// ‖y₁ - y₂‖_{H¹₀} <= (1 + 1e-8) ‖u₁ - u₂‖_{H⁻¹} over random pairs (1D n=64, 2D n=32, α ∈ {¼, ½, ¾}).
CheckResult check_stability_estimate(const SuiteOptions& opts);
/// Accelerated prox and coordinate descent agree to 1e-8 in max norm on 20 instances.
CheckResult check_solver_uniqueness(const SuiteOptions& opts);
/// pde_residual <= 1e-10 and vi_gap >= -1e-9 for 100 random test fields per solved state.
CheckResult check_vi_equivalence(const SuiteOptions& opts);
/// All expansion residuals <= 1e-8 (1 + |LHS|) over 1000 random draws.
CheckResult check_expansion_identities(const SuiteOptions& opts);
/// L∞ order >= 1.8 (sine) and >= 1.5 (plateau) over n ∈ {64, 128, 256}; plateau mask is the left half.
CheckResult check_manufactured_convergence(const SuiteOptions& opts);
/// r(τ) strictly decreasing and r(1e-4) <= 0.05 r(1e-1) for u ≡ 10, 1D n=128, α = ½.
CheckResult check_frechet_remainder(const SuiteOptions& opts);
/// Log-log slope of ‖δ_τ‖_{L^(α+1)(Z)} >= ½(1-α)/(1+α) on the plateau instance, α = ½.
CheckResult check_dead_zone_decay(const SuiteOptions& opts);
/// Adjoint identity to 1e-10 on 20 directions; reduced gradient vs central differences <= 1e-4 on 10 controls.
CheckResult check_adjoint_gradient(const SuiteOptions& opts);
/// Projected gradient on the tracking instance reaches the KKT and Bouligand thresholds from 3 starts.
CheckResult check_optimizer_kkt(const SuiteOptions& opts);
/// Truncation chain ‖p_k‖²_{H¹₀} <= (p_k, p_k)_V <= (dJ_dy, p_k) to 1e-10 relative.
CheckResult check_truncation_chain(const SuiteOptions& opts);
/// Embedding and adjoint exponent intervals match the closed-form case tables for d = 1..6.
CheckResult check_exponent_tables(const SuiteOptions& opts);

struct NamedCheck {
  std::string name;
  std::function<CheckResult(const SuiteOptions&)> run;
};

/// All checks above, in order.
[[nodiscard]] std::vector<NamedCheck> property_suite();

[[nodiscard]] std::vector<CheckResult> run_property_suite(const SuiteOptions& opts);

}  // namespace nsoc
