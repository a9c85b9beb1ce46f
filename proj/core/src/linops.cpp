#include "ubpod/linops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

#include "ubpod/io.hpp"

namespace ubpod {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

lapack_logical select_positive(const double* re, const double*) {
  return *re > 0.0;
}

lapack_logical select_negative(const double* re, const double*) {
  return *re < 0.0;
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

// ---------------------------------------------------------------------------
// InnerProductWeight

InnerProductWeight InnerProductWeight::Identity(int n) {
  if (n < 0) throw ValidationError("weight dimension must be nonnegative");
  InnerProductWeight w;
  w.kind_ = Kind::kIdentity;
  w.n_ = n;
  return w;
}

InnerProductWeight InnerProductWeight::Diagonal(const Vector& d) {
  if (!d.allFinite() || (d.size() > 0 && d.minCoeff() <= 0.0)) {
    throw ValidationError("diagonal weight must be finite and positive");
  }
  InnerProductWeight w;
  w.kind_ = Kind::kDiagonal;
  w.n_ = static_cast<int>(d.size());
  w.diag_ = d;
  w.sqrt_diag_ = d.cwiseSqrt();
  return w;
}

InnerProductWeight InnerProductWeight::Dense(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw ValidationError("weight must be square, got " + dims(m));
  }
  if (!m.allFinite()) throw ValidationError("weight has non-finite entries");
  const double scale = std::max(m.norm(), 1e-300);
  if ((m - m.transpose()).norm() > 1e-12 * scale) {
    throw ValidationError("weight is not symmetric");
  }
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) {
    throw ValidationError("weight is not positive definite");
  }
  InnerProductWeight w;
  w.kind_ = Kind::kDense;
  w.n_ = static_cast<int>(m.rows());
  w.w_ = 0.5 * (m + m.transpose());
  w.chol_upper_ = llt.matrixU();
  return w;
}

void InnerProductWeight::check_rows(const Matrix& x) const {
  if (x.rows() != n_) {
    throw ValidationError("weight of size " + std::to_string(n_) +
                          " applied to " + dims(x));
  }
}

Matrix InnerProductWeight::apply(const Matrix& x) const {
  check_rows(x);
  switch (kind_) {
    case Kind::kIdentity:
      return x;
    case Kind::kDiagonal:
      return diag_.asDiagonal() * x;
    case Kind::kDense:
      return w_ * x;
  }
  return x;
}

Matrix InnerProductWeight::solve(const Matrix& x) const {
  check_rows(x);
  switch (kind_) {
    case Kind::kIdentity:
      return x;
    case Kind::kDiagonal:
      return diag_.cwiseInverse().asDiagonal() * x;
    case Kind::kDense: {
      Matrix y = chol_upper_.transpose().triangularView<Eigen::Lower>().solve(x);
      return chol_upper_.triangularView<Eigen::Upper>().solve(y);
    }
  }
  return x;
}

Matrix InnerProductWeight::factor(const Matrix& x) const {
  check_rows(x);
  switch (kind_) {
    case Kind::kIdentity:
      return x;
    case Kind::kDiagonal:
      return sqrt_diag_.asDiagonal() * x;
    case Kind::kDense:
      return chol_upper_.triangularView<Eigen::Upper>() * x;
  }
  return x;
}

Matrix InnerProductWeight::factor_solve(const Matrix& x) const {
  check_rows(x);
  switch (kind_) {
    case Kind::kIdentity:
      return x;
    case Kind::kDiagonal:
      return sqrt_diag_.cwiseInverse().asDiagonal() * x;
    case Kind::kDense:
      return chol_upper_.triangularView<Eigen::Upper>().solve(x);
  }
  return x;
}

double InnerProductWeight::inner(const Vector& x, const Vector& y) const {
  check_rows(x);
  check_rows(y);
  switch (kind_) {
    case Kind::kIdentity:
      return x.dot(y);
    case Kind::kDiagonal:
      return x.dot(diag_.cwiseProduct(y));
    case Kind::kDense:
      return x.dot(w_ * y);
  }
  return 0.0;
}

double InnerProductWeight::norm(const Vector& x) const {
  return std::sqrt(std::max(inner(x, x), 0.0));
}

Matrix InnerProductWeight::gram(const Matrix& x, const Matrix& y) const {
  check_rows(x);
  check_rows(y);
  return x.transpose() * apply(y);
}

Matrix InnerProductWeight::dense() const {
  switch (kind_) {
    case Kind::kIdentity:
      return Matrix::Identity(n_, n_);
    case Kind::kDiagonal:
      return diag_.asDiagonal();
    case Kind::kDense:
      return w_;
  }
  return Matrix();
}

std::uint64_t InnerProductWeight::hash() const {
  std::uint64_t h = fnv1a(&n_, sizeof(n_));
  const int k = static_cast<int>(kind_);
  h = fnv1a(&k, sizeof(k), h);
  if (kind_ == Kind::kDiagonal) h = hash_matrix(diag_, h);
  if (kind_ == Kind::kDense) h = hash_matrix(w_, h);
  return h;
}

double weighted_inner(const Vector& x, const Vector& y,
                      const InnerProductWeight& w) {
  if (x.size() != y.size() || x.size() != w.size()) {
    throw ValidationError("weighted_inner: dimension mismatch");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw ValidationError("weighted_inner: non-finite input");
  }
  return w.inner(x, y);
}

// ---------------------------------------------------------------------------
// LinearOperator

LinearOperator LinearOperator::FromDense(const Matrix& a,
                                         const InnerProductWeight& w) {
  if (a.rows() != a.cols()) {
    throw ValidationError("operator must be square, got " + dims(a));
  }
  if (w.size() != a.rows()) {
    throw ValidationError("operator and weight dimensions differ");
  }
  return FromDensePair(a, w.solve(a.transpose() * w.dense()));
}

LinearOperator LinearOperator::FromDensePair(const Matrix& a,
                                             const Matrix& adjoint) {
  if (a.rows() != a.cols() || adjoint.rows() != a.rows() ||
      adjoint.cols() != a.cols()) {
    throw ValidationError("dense operator pair has inconsistent dimensions");
  }
  if (!a.allFinite() || !adjoint.allFinite()) {
    throw ValidationError("dense operator has non-finite entries");
  }
  LinearOperator op;
  op.n_ = static_cast<int>(a.rows());
  op.dense_ = true;
  op.a_ = a;
  op.a_adj_ = adjoint;
  return op;
}

LinearOperator LinearOperator::FromCallbacks(int n, Action apply,
                                             Action apply_adjoint) {
  if (n < 0 || !apply || !apply_adjoint) {
    throw ValidationError("matrix-free operator needs both actions");
  }
  LinearOperator op;
  op.n_ = n;
  op.apply_ = std::move(apply);
  op.apply_adj_ = std::move(apply_adjoint);
  return op;
}

const Matrix& LinearOperator::matrix() const {
  if (!dense_) throw ValidationError("operator has no dense realization");
  return a_;
}

const Matrix& LinearOperator::adjoint_matrix() const {
  if (!dense_) throw ValidationError("operator has no dense realization");
  return a_adj_;
}

Vector LinearOperator::apply(const Vector& x) const {
  if (x.size() != n_) throw ValidationError("operator applied to wrong size");
  return dense_ ? Vector(a_ * x) : apply_(x);
}

Vector LinearOperator::apply_adjoint(const Vector& z) const {
  if (z.size() != n_) throw ValidationError("adjoint applied to wrong size");
  return dense_ ? Vector(a_adj_ * z) : apply_adj_(z);
}

Matrix LinearOperator::apply(const Matrix& x) const {
  if (x.rows() != n_) throw ValidationError("operator applied to wrong size");
  if (dense_) return a_ * x;
  Matrix y(n_, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.col(j) = apply_(x.col(j));
  return y;
}

Matrix LinearOperator::apply_adjoint(const Matrix& z) const {
  if (z.rows() != n_) throw ValidationError("adjoint applied to wrong size");
  if (dense_) return a_adj_ * z;
  Matrix y(n_, z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) y.col(j) = apply_adj_(z.col(j));
  return y;
}

LinearOperator LinearOperator::adjoint() const {
  LinearOperator op = *this;
  std::swap(op.a_, op.a_adj_);
  std::swap(op.apply_, op.apply_adj_);
  return op;
}

// ---------------------------------------------------------------------------
// StateSpaceSystem

void StateSpaceSystem::validate(double axis_tol) const {
  const int n = states();
  if (B.rows() != n) throw ValidationError("B has " + dims(B) + ", n=" + std::to_string(n));
  if (C.cols() != n) throw ValidationError("C has " + dims(C) + ", n=" + std::to_string(n));
  if (W.size() != n) throw ValidationError("state weight dimension differs from n");
  if (output_weight.size() != C.rows()) {
    throw ValidationError("output weight dimension differs from C rows");
  }
  if (!B.allFinite() || !C.allFinite()) {
    throw ValidationError("B or C has non-finite entries");
  }
  if (A.is_dense()) {
    if (!A.matrix().allFinite()) throw ValidationError("A has non-finite entries");
    if (n <= kDenseSizeCap && n > 0) {
      const ComplexVector ev = eigenvalues(A.matrix());
      const double scale = std::max(1.0, A.matrix().norm());
      for (const auto& l : ev) {
        if (std::abs(l.real()) <= axis_tol * scale) {
          throw ValidationError("A has an eigenvalue on the imaginary axis");
        }
      }
    }
  }
}

StateSpaceSystem make_system(const Matrix& a, const Matrix& b, const Matrix& c,
                             const InnerProductWeight& w,
                             const InnerProductWeight& out_w) {
  StateSpaceSystem sys;
  const int n = static_cast<int>(a.rows());
  sys.W = w.size() == 0 && n > 0 ? InnerProductWeight::Identity(n) : w;
  sys.output_weight = out_w.size() == 0 && c.rows() > 0
                          ? InnerProductWeight::Identity(static_cast<int>(c.rows()))
                          : out_w;
  sys.A = LinearOperator::FromDense(a, sys.W);
  sys.B = b;
  sys.C = c;
  return sys;
}

// ---------------------------------------------------------------------------
// Adjoint consistency

double adjoint_residual(const LinearOperator& a, const InnerProductWeight& w,
                        int trials, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("adjoint_residual: trials must be >= 1");
  if (w.size() != a.size()) {
    throw ValidationError("adjoint_residual: dimension mismatch");
  }
  const int n = a.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto draw = [&] {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
  };
  std::vector<Vector> xs, zs, axs, azs;
  double a_est = 0.0;
  for (int t = 0; t < trials; ++t) {
    xs.push_back(draw());
    zs.push_back(draw());
    axs.push_back(a.apply(xs.back()));
    azs.push_back(a.apply_adjoint(zs.back()));
    a_est = std::max(a_est, w.norm(axs.back()) / w.norm(xs.back()));
    a_est = std::max(a_est, w.norm(azs.back()) / w.norm(zs.back()));
  }
  if (a_est == 0.0) return 0.0;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double lhs = w.inner(axs[t], zs[t]);
    const double rhs = w.inner(xs[t], azs[t]);
    const double denom = w.norm(xs[t]) * w.norm(zs[t]) * a_est;
    worst = std::max(worst, std::abs(lhs - rhs) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Dense decompositions

SvdResult svd(const Matrix& m) {
  if (!m.allFinite()) throw ValidationError("svd: non-finite input");
  SvdResult out;
  if (m.size() == 0) {
    out.U = Matrix(m.rows(), 0);
    out.V = Matrix(m.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) {
    throw NumericalError("svd: decomposition did not converge");
  }
  out.U = dec.matrixU();
  out.s = dec.singularValues();
  out.V = dec.matrixV();
  return out;
}

namespace {

std::vector<int> eigen_order(const ComplexVector& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) {
    const auto& a = v(i);
    const auto& b = v(j);
    if (a.real() != b.real()) return a.real() > b.real();
    if (std::abs(a.imag()) != std::abs(b.imag())) {
      return std::abs(a.imag()) > std::abs(b.imag());
    }
    return a.imag() > b.imag();
  });
  return idx;
}

}  // namespace

ComplexVector eigenvalues(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("eigenvalues: non-square");
  if (a.rows() == 0) return ComplexVector();
  if (!a.allFinite()) throw ValidationError("eigenvalues: non-finite input");
  Eigen::EigenSolver<Matrix> es(a, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigenvalues: QR iteration did not converge");
  }
  const ComplexVector raw = es.eigenvalues();
  const std::vector<int> idx = eigen_order(raw);
  ComplexVector out(raw.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out(k) = raw(idx[k]);
  return out;
}

double spectral_abscissa(const Matrix& a) {
  if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
  return eigenvalues(a)(0).real();
}

EigResult eig_dense(const Matrix& a, int size_cap) {
  if (a.rows() != a.cols()) throw ValidationError("eig_dense: non-square");
  if (a.rows() > size_cap) {
    throw ValidationError("eig_dense: n=" + std::to_string(a.rows()) +
                          " exceeds dense cap " + std::to_string(size_cap));
  }
  if (!a.allFinite()) throw ValidationError("eig_dense: non-finite input");
  const int n = static_cast<int>(a.rows());
  EigResult out;
  if (n == 0) return out;
  Eigen::EigenSolver<Matrix> es(a, true);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eig_dense: QR iteration did not converge");
  }
  const ComplexVector raw = es.eigenvalues();
  const ComplexMatrix vecs = es.eigenvectors();
  const std::vector<int> idx = eigen_order(raw);
  out.values.resize(n);
  out.right.resize(n, n);
  int k = 0;
  while (k < n) {
    const int i = idx[k];
    const std::complex<double> l = raw(i);
    out.values(k) = l;
    Eigen::VectorXcd v = vecs.col(i);
    v /= v.norm();
    if (l.imag() != 0.0 && k + 1 < n) {
      out.values(k + 1) = raw(idx[k + 1]);
      out.right.col(k) = v.real();
      out.right.col(k + 1) = v.imag();
      k += 2;
    } else {
      out.right.col(k) = v.real().normalized();
      k += 1;
    }
  }
  Eigen::PartialPivLU<Matrix> lu(out.right);
  if (!(std::abs(lu.determinant()) > 0.0)) {
    throw NumericalError("eig_dense: defective eigenvector basis");
  }
  out.left = lu.inverse().transpose();
  return out;
}

SchurResult ordered_schur(const Matrix& a, SchurOrder order) {
  if (a.rows() != a.cols()) throw ValidationError("ordered_schur: non-square");
  if (!a.allFinite()) throw ValidationError("ordered_schur: non-finite input");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  SchurResult out;
  out.T = a;
  out.U = Matrix::Zero(n, n);
  out.values.resize(n);
  if (n == 0) return out;
  std::vector<double> wr(n), wi(n);
  lapack_int sdim = 0;
  LAPACK_D_SELECT2 select =
      order == SchurOrder::kUnstableFirst ? select_positive : select_negative;
  const lapack_int info =
      LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', select, n, out.T.data(), n,
                    &sdim, wr.data(), wi.data(), out.U.data(), n);
  if (info != 0) {
    throw NumericalError("ordered_schur: dgees failed with info " +
                         std::to_string(info));
  }
  out.selected = static_cast<int>(sdim);
  for (lapack_int i = 0; i < n; ++i) out.values(i) = {wr[i], wi[i]};
  return out;
}

// ---------------------------------------------------------------------------
// Subspace utilities

Matrix w_orthonormalize(const Matrix& x, const InnerProductWeight& w) {
  if (x.cols() == 0) return x;
  const Matrix y = w.factor(x);
  Eigen::HouseholderQR<Matrix> qr(y);
  const Eigen::Index k = std::min(y.rows(), y.cols());
  Matrix q = qr.householderQ() * Matrix::Identity(y.rows(), k);
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return w.factor_solve(q);
}

double subspace_distance(const Matrix& q1, const Matrix& q2,
                         const InnerProductWeight& w) {
  if (q1.cols() != q2.cols()) return 1.0;
  if (q1.cols() == 0) return 0.0;
  const Matrix f1 = w.factor(q1);
  const Matrix f2 = w.factor(q2);
  const Matrix r = f2 - f1 * (f1.transpose() * f2);
  Eigen::JacobiSVD<Matrix> dec(r);
  return std::min(1.0, dec.singularValues()(0));
}

}  // namespace ubpod
