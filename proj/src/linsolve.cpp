#include "nsoc/linsolve.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "nsoc/errors.hpp"

namespace nsoc {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

CgResult conjugate_gradient(const Operator& A, std::span<const double> b, double tol, std::span<const double> x0) {
  if (!(tol > 0.0)) throw std::invalid_argument("conjugate_gradient: tol must be positive");
  const std::size_t m = A.rows();
  if (b.size() != m) throw std::invalid_argument("conjugate_gradient: right-hand side size mismatch");
  if (!x0.empty() && x0.size() != m) throw std::invalid_argument("conjugate_gradient: initial guess size mismatch");

  CgResult out;
  out.x.assign(m, 0.0);
  if (!x0.empty()) out.x.assign(x0.begin(), x0.end());
  if (m == 0) return out;

  const double target = tol * std::max(1.0, norm2(b));
  const auto diag = A.diagonal_entries();
  for (double d : diag) {
    if (!(d > 0.0)) throw std::invalid_argument("conjugate_gradient: Jacobi preconditioner needs a positive diagonal");
  }

  const long budget = 10 * static_cast<long>(m);
  std::vector<double> r(m), z(m), p(m), ap(m);

  // The recursive residual can drift from the true one; restart from the
  // current iterate until the true residual meets the target.
  while (true) {
    A.apply(out.x, ap);
    for (std::size_t i = 0; i < m; ++i) r[i] = b[i] - ap[i];
    out.residual_norm = norm2(r);
    if (out.residual_norm <= target) return out;
    if (out.iterations >= budget) {
      throw ConvergenceError("conjugate gradients did not converge", out.iterations, out.residual_norm);
    }

    for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = dot(r, z);
    while (out.iterations < budget) {
      A.apply(p, ap);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) {
        throw ConvergenceError("conjugate gradients met a non-positive curvature direction", out.iterations,
                               norm2(r));
      }
      const double step = rz / pap;
      for (std::size_t i = 0; i < m; ++i) {
        out.x[i] += step * p[i];
        r[i] -= step * ap[i];
      }
      ++out.iterations;
      if (norm2(r) <= 0.5 * target) break;
      for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / diag[i];
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
    }
  }
}

Field cg_solve(const Operator& A, const Field& b, double tol) {
  if (A.rows() != b.size()) throw GridMismatch("operator and field sizes differ");
  auto res = conjugate_gradient(A, b.values(), tol);
  return Field(b.grid(), std::move(res.x));
}

double lambda_max(const Operator& A) {
  const std::size_t m = A.rows();
  if (m == 0) return 0.0;
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> v(m);
  for (double& x : v) x = dist(rng);
  std::vector<double> av(m);
  double estimate = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double nv = norm2(v);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    A.apply(v, av);
    estimate = dot(v, av);
    v.swap(av);
  }
  return estimate;
}

}  // namespace nsoc
