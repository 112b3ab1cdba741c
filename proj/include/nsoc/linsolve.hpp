#pragma once

#include <span>
#include <vector>

#include "nsoc/grid.hpp"

namespace nsoc {

struct CgResult {
  std::vector<double> x;
  long iterations = 0;
  double residual_norm = 0.0;  ///< true residual ‖Ax - b‖₂
};

/// Jacobi-preconditioned conjugate gradients for SPD A.
/// Guarantees ‖Ax - b‖₂ <= tol * max(1, ‖b‖₂); throws ConvergenceError after 10*m iterations.
[[nodiscard]] CgResult conjugate_gradient(const Operator& A, std::span<const double> b, double tol,
                                          std::span<const double> x0 = {});

[[nodiscard]] Field cg_solve(const Operator& A, const Field& b, double tol);

/// Largest eigenvalue by 200 power iterations from a fixed seeded start vector.
[[nodiscard]] double lambda_max(const Operator& A);

}  // namespace nsoc
