#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ubpod/linops.hpp"

namespace ubpod {

namespace {

// Start index and size of each diagonal block of a quasi-triangular matrix.
struct Block {
  int start;
  int size;
};

std::vector<Block> diagonal_blocks(const Matrix& t) {
  std::vector<Block> blocks;
  const int n = static_cast<int>(t.rows());
  int k = 0;
  while (k < n) {
    if (k + 1 < n && t(k + 1, k) != 0.0) {
      blocks.push_back({k, 2});
      k += 2;
    } else {
      blocks.push_back({k, 1});
      k += 1;
    }
  }
  return blocks;
}

// Solves P Y + Y Q = R for blocks of size <= 2 via the Kronecker form.
Matrix solve_small(const Matrix& p, const Matrix& q, const Matrix& r) {
  const int m = static_cast<int>(p.rows());
  const int k = static_cast<int>(q.rows());
  Matrix kron = Matrix::Zero(m * k, m * k);
  for (int j = 0; j < k; ++j) {
    kron.block(j * m, j * m, m, m) += p;
    for (int i = 0; i < k; ++i) {
      kron.block(i * m, j * m, m, m) +=
          q(j, i) * Matrix::Identity(m, m);
    }
  }
  Eigen::FullPivLU<Matrix> lu(kron);
  if (!lu.isInvertible()) {
    throw NumericalError(
        "solve_sylvester: operators share an eigenvalue pair (lambda_a = "
        "-lambda_b)");
  }
  const Vector y = lu.solve(Eigen::Map<const Vector>(r.data(), m * k));
  return Eigen::Map<const Matrix>(y.data(), m, k);
}

}  // namespace

Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || c.rows() != a.rows() ||
      c.cols() != b.rows()) {
    throw ValidationError("solve_sylvester: inconsistent dimensions");
  }
  if (!a.allFinite() || !b.allFinite() || !c.allFinite()) {
    throw ValidationError("solve_sylvester: non-finite input");
  }
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(b.rows());
  if (m == 0 || n == 0) return Matrix::Zero(m, n);

  Eigen::RealSchur<Matrix> sa(a);
  Eigen::RealSchur<Matrix> sb(b);
  if (sa.info() != Eigen::Success || sb.info() != Eigen::Success) {
    throw NumericalError("solve_sylvester: Schur decomposition failed");
  }
  const Matrix& ta = sa.matrixT();
  const Matrix& ua = sa.matrixU();
  const Matrix& tb = sb.matrixT();
  const Matrix& ub = sb.matrixU();
  const Matrix f = ua.transpose() * c * ub;

  const std::vector<Block> ba = diagonal_blocks(ta);
  const std::vector<Block> bb = diagonal_blocks(tb);
  Matrix y = Matrix::Zero(m, n);
  for (const Block& cj : bb) {
    // Columns left of this block contribute through the upper part of tb.
    Matrix rhs = f.middleCols(cj.start, cj.size);
    if (cj.start > 0) {
      rhs.noalias() -= y.leftCols(cj.start) *
                       tb.block(0, cj.start, cj.start, cj.size);
    }
    const Matrix q = tb.block(cj.start, cj.start, cj.size, cj.size);
    for (auto it = ba.rbegin(); it != ba.rend(); ++it) {
      const int r0 = it->start;
      const int rs = it->size;
      const int tail = m - (r0 + rs);
      Matrix local = rhs.middleRows(r0, rs);
      if (tail > 0) {
        local.noalias() -= ta.block(r0, r0 + rs, rs, tail) *
                           y.block(r0 + rs, cj.start, tail, cj.size);
      }
      y.block(r0, cj.start, rs, cj.size) =
          solve_small(ta.block(r0, r0, rs, rs), q, local);
    }
  }
  return ua * y * ub.transpose();
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols()) {
    throw ValidationError("solve_lyapunov: inconsistent dimensions");
  }
  if (a.rows() == 0) return Matrix(0, 0);
  const double abscissa = spectral_abscissa(a);
  if (!(abscissa < 0.0)) {
    throw ValidationError(
        "solve_lyapunov: A is not stable (spectral abscissa " +
        std::to_string(abscissa) + "); negate or decouple first");
  }
  const Matrix x = solve_sylvester(a, a.transpose(), -q);
  return 0.5 * (x + x.transpose());
}

double lyapunov_residual(const Matrix& a, const Matrix& q, const Matrix& x) {
  const double qn = q.norm();
  const double r = (a * x + x * a.transpose() + q).norm();
  return qn > 0.0 ? r / qn : r;
}

}  // namespace ubpod
