#include <cmath>

#include "ubpod/linops.hpp"

namespace ubpod {

Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& q,
                  const Matrix& r) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols()) {
    throw ValidationError("solve_care: inconsistent dimensions");
  }
  if (!a.allFinite() || !b.allFinite() || !q.allFinite() || !r.allFinite()) {
    throw ValidationError("solve_care: non-finite input");
  }
  if (n == 0) return Matrix(0, 0);
  Eigen::LLT<Matrix> r_llt(0.5 * (r + r.transpose()));
  if (r_llt.info() != Eigen::Success) {
    throw ValidationError("solve_care: R is not positive definite");
  }
  const Matrix g = b * r_llt.solve(b.transpose());

  Matrix h(2 * n, 2 * n);
  h << a, -g, -0.5 * (q + q.transpose()), -a.transpose();

  const SchurResult s = ordered_schur(h, SchurOrder::kStableFirst);
  const double scale = std::max(1.0, h.norm());
  for (const auto& l : s.values) {
    if (std::abs(l.real()) <= 1e-10 * scale) {
      throw NumericalError(
          "solve_care: Hamiltonian has eigenvalues on the imaginary axis; "
          "the pair is not stabilizable or not detectable");
    }
  }
  if (s.selected != n) {
    throw NumericalError("solve_care: stable invariant subspace has dimension " +
                         std::to_string(s.selected) + ", expected " +
                         std::to_string(n));
  }
  const Matrix u11 = s.U.topLeftCorner(n, n);
  const Matrix u21 = s.U.bottomLeftCorner(n, n);
  Eigen::PartialPivLU<Matrix> lu(u11.transpose());
  if (!(std::abs(lu.determinant()) > 0.0) || lu.rcond() < 1e-14) {
    throw NumericalError("solve_care: invariant subspace basis is singular");
  }
  Matrix p = lu.solve(u21.transpose()).transpose();
  p = 0.5 * (p + p.transpose());
  if (!p.allFinite()) throw NumericalError("solve_care: non-finite solution");
  return p;
}

double care_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                     const Matrix& r, const Matrix& p) {
  // Relative to the size of the terms, so a nearly zero Q does not turn
  // round-off in the other terms into a large "relative" residual.
  const Matrix quad = p * b * r.llt().solve(b.transpose()) * p;
  const Matrix res = a.transpose() * p + p * a - quad + q;
  const double scale = q.norm() + 2.0 * a.norm() * p.norm() + quad.norm();
  return res.norm() / std::max(scale, 1e-300);
}

}  // namespace ubpod
