#pragma once

// Pointwise building blocks of the state equation -Δy + sgn(y)|y|^α = u:
// the power nonlinearity, its convex potential, the exact scalar proximal
// map, and executable checks of the Taylor-like expansion identities used
// in the sensitivity analysis.

namespace nsoc {

/// Exponent of the power nonlinearity; valid values lie in the open interval (0, 1).
class Exponent {
 public:
  explicit Exponent(double value);

  [[nodiscard]] double value() const noexcept { return value_; }

  friend bool operator==(Exponent, Exponent) = default;

 private:
  double value_;
};

/// |s|^e as exp(e*log|s|), with 0 mapped to 0.
[[nodiscard]] double abs_pow(double s, double e) noexcept;

/// s -> sgn(s)|s|^α.
[[nodiscard]] double phi(double s, Exponent alpha) noexcept;

/// Derivative α|s|^(α-1) of phi away from the origin; +inf at s = 0.
[[nodiscard]] double phi_slope(double s, Exponent alpha) noexcept;

/// Convex potential |s|^(α+1)/(α+1); its derivative is phi.
[[nodiscard]] double potential(double s, Exponent alpha) noexcept;

/// potential(b) - potential(a), accurate when b is close to a.
[[nodiscard]] double potential_increment(double a, double b, Exponent alpha) noexcept;

/// Unique x with x + t*phi(x) = v, i.e. the minimizer of ½(x-v)² + t*potential(x).
/// Throws std::invalid_argument unless t > 0.
[[nodiscard]] double prox_potential(double v, double t, Exponent alpha);

/// ∫_0^1 (1-s)((1-s)a + s b)^(β-1) ds for a > 0, b >= 0, by graded
/// Gauss-Legendre quadrature refined toward both ends of [0, 1].
[[nodiscard]] long double taylor_kernel_integral(long double a, long double b, double beta);

/// Absolute residuals |LHS - RHS| of the three expansion identities for
/// powers of |x| (first-order Taylor remainder, difference quotient of |.|,
/// and the squared increment), together with the corresponding left-hand sides.
struct ExpansionResiduals {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double lhs1 = 0.0;
  double lhs2 = 0.0;
  double lhs3 = 0.0;
};

/// Requires x != 0 and t > 0 (std::invalid_argument otherwise).
[[nodiscard]] ExpansionResiduals expansion_residuals(double x, double t, double z, Exponent beta);

}  // namespace nsoc
