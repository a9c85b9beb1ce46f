#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ubpod {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Bad input: dimensions, ranges, configuration, or violated preconditions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed: non-convergence, singularity, blow-up.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default cap on the state dimension for dense oracle paths.
inline constexpr int kDenseSizeCap = 400;

/// Symmetric positive-definite weight W defining <x, y>_W = x'Wy. The factor
/// F with W = F'F is cached so weighted products reduce to Euclidean ones.
class InnerProductWeight {
 public:
  InnerProductWeight() = default;

  static InnerProductWeight Identity(int n);
  static InnerProductWeight Diagonal(const Vector& d);
  static InnerProductWeight Dense(const Matrix& w);

  int size() const { return n_; }
  bool is_identity() const { return kind_ == Kind::kIdentity; }
  bool is_diagonal() const { return kind_ != Kind::kDense; }

  /// W x.
  Matrix apply(const Matrix& x) const;
  /// W^{-1} x.
  Matrix solve(const Matrix& x) const;
  /// F x.
  Matrix factor(const Matrix& x) const;
  /// F^{-1} x.
  Matrix factor_solve(const Matrix& x) const;

  double inner(const Vector& x, const Vector& y) const;
  double norm(const Vector& x) const;
  /// X' W Y.
  Matrix gram(const Matrix& x, const Matrix& y) const;

  Matrix dense() const;
  std::uint64_t hash() const;

 private:
  enum class Kind { kIdentity, kDiagonal, kDense };

  void check_rows(const Matrix& x) const;

  Kind kind_{Kind::kIdentity};
  int n_{0};
  Vector diag_;
  Vector sqrt_diag_;
  Matrix w_;
  Matrix chol_upper_;  // F, upper triangular
};

/// <x, y>_W with dimension and finiteness checks.
double weighted_inner(const Vector& x, const Vector& y,
                      const InnerProductWeight& w);

/// Square operator with an action and its W-adjoint. Dense realizations keep
/// both matrices; matrix-free ones wrap callbacks.
class LinearOperator {
 public:
  using Action = std::function<Vector(const Vector&)>;

  LinearOperator() = default;

  /// Dense A with adjoint W^{-1} A' W.
  static LinearOperator FromDense(const Matrix& a, const InnerProductWeight& w);
  /// Dense A with an explicitly supplied adjoint matrix.
  static LinearOperator FromDensePair(const Matrix& a, const Matrix& adjoint);
  static LinearOperator FromCallbacks(int n, Action apply,
                                      Action apply_adjoint);

  int size() const { return n_; }
  bool is_dense() const { return dense_; }
  const Matrix& matrix() const;
  const Matrix& adjoint_matrix() const;

  Vector apply(const Vector& x) const;
  Vector apply_adjoint(const Vector& z) const;
  Matrix apply(const Matrix& x) const;
  Matrix apply_adjoint(const Matrix& z) const;

  /// The operator with action and adjoint swapped.
  LinearOperator adjoint() const;

 private:
  int n_{0};
  bool dense_{false};
  Matrix a_;
  Matrix a_adj_;
  Action apply_;
  Action apply_adj_;
};

/// Nonlinear dynamics dx/dt = L x + N(x) + B u. The linear part L is treated
/// implicitly by the stepper; N (which may include a constant source) is
/// treated explicitly.
struct NonlinearDynamics {
  Matrix linear;
  std::function<Vector(const Vector&)> remainder;
  /// Jacobian of the full right-hand side at x.
  std::function<Matrix(const Vector&)> jacobian;

  Vector rhs(const Vector& x) const { return linear * x + remainder(x); }
};

/// Plant (A, B, C) with state weight W and output weight W_out. For
/// nonlinear plants A is the linearization about a reference state.
struct StateSpaceSystem {
  LinearOperator A;
  Matrix B;
  Matrix C;
  InnerProductWeight W;
  InnerProductWeight output_weight;
  std::optional<NonlinearDynamics> nonlinear;

  int states() const { return A.size(); }
  int inputs() const { return static_cast<int>(B.cols()); }
  int outputs() const { return static_cast<int>(C.rows()); }

  /// Checks dimensions, finiteness and (for dense A of size <= cap) that no
  /// eigenvalue lies within `axis_tol` of the imaginary axis.
  void validate(double axis_tol = 1e-10) const;
};

/// Builds a dense system; output weight defaults to identity.
StateSpaceSystem make_system(const Matrix& a, const Matrix& b, const Matrix& c,
                             const InnerProductWeight& w = {},
                             const InnerProductWeight& out_w = {});

/// max |<Ax,z>_W - <x,A*z>_W| / (|x|_W |z|_W |A|_est) over random pairs.
double adjoint_residual(const LinearOperator& a, const InnerProductWeight& w,
                        int trials, std::uint64_t seed);

struct SvdResult {
  Matrix U;
  Vector s;
  Matrix V;
};

/// Thin SVD, singular values nonincreasing.
SvdResult svd(const Matrix& m);

struct EigResult {
  /// Sorted by decreasing real part; conjugate pairs adjacent, positive
  /// imaginary part first.
  ComplexVector values;
  /// Real block form: a complex pair occupies two columns (Re v, Im v).
  Matrix right;
  /// Rows of right^{-1}, transposed: left' * right = I.
  Matrix left;
};

EigResult eig_dense(const Matrix& a, int size_cap = kDenseSizeCap);

/// Eigenvalues only, sorted as in eig_dense.
ComplexVector eigenvalues(const Matrix& a);
double spectral_abscissa(const Matrix& a);

struct SchurResult {
  Matrix T;
  Matrix U;
  /// Number of leading eigenvalues satisfying the selection.
  int selected{0};
  ComplexVector values;
};

enum class SchurOrder { kUnstableFirst, kStableFirst };

/// Real Schur form A = U T U' with the selected half of the spectrum leading.
SchurResult ordered_schur(const Matrix& a, SchurOrder order);

/// Solves A X + X B = C by Bartels-Stewart.
Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c);

/// Solves A X + X A' + Q = 0 for stable A.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// Stabilizing solution of A'P + PA - P B R^{-1} B' P + Q = 0.
Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& q,
                  const Matrix& r);

double lyapunov_residual(const Matrix& a, const Matrix& q, const Matrix& x);
/// |A'P + PA - P B R^{-1} B' P + Q| over the sum of the term norms.
double care_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                     const Matrix& r, const Matrix& p);

enum class Scheme { kCrankNicolson, kExactExpm };

/// One-step propagator x -> M x for a linear operator. Dense operators
/// precompute M; matrix-free operators solve the implicit CN stage by GMRES.
class Propagator {
 public:
  Propagator(const LinearOperator& a, double dt,
             Scheme scheme = Scheme::kCrankNicolson);

  Vector step(const Vector& x) const;
  Matrix step(const Matrix& x) const;
  /// Propagator of the W-adjoint operator.
  Propagator adjoint() const;

  double dt() const { return dt_; }
  Scheme scheme() const { return scheme_; }
  bool is_dense() const { return op_.is_dense(); }
  const Matrix& matrix() const { return m_; }
  /// (I - dt/2 A)^{-1}, used to add zero-order-hold forcing (dense CN only).
  const Matrix& implicit_inverse() const { return implicit_inv_; }

 private:
  LinearOperator op_;
  double dt_;
  Scheme scheme_;
  Matrix m_;
  Matrix implicit_inv_;
};

/// x after one step of size dt.
Vector propagate(const LinearOperator& a, const Vector& x, double dt,
                 Scheme scheme);

/// Matrix exponential by scaling and squaring.
Matrix expm(const Matrix& a);

/// Crank-Nicolson on L with Adams-Bashforth-2 on the remainder and forcing;
/// forward Euler on the explicit part for the first step after reset.
class NonlinearStepper {
 public:
  NonlinearStepper(const NonlinearDynamics& dyn, double dt);

  /// Advances x in place; `forcing` is added to the explicit term.
  void step(Vector& x, const Vector& forcing);
  void step(Vector& x);
  void reset() { have_previous_ = false; }
  double dt() const { return dt_; }

 private:
  NonlinearDynamics dyn_;
  double dt_;
  Eigen::PartialPivLU<Matrix> implicit_;
  Matrix explicit_half_;  // (I - dt/2 L)^{-1} (I + dt/2 L)
  Matrix implicit_inv_;
  Vector previous_;
  bool have_previous_{false};
};

/// Orthonormal basis (W-sense) of the column span: X = Q R with Q'WQ = I.
Matrix w_orthonormalize(const Matrix& x, const InnerProductWeight& w);

/// Largest principal-angle sine between W-orthonormal bases.
double subspace_distance(const Matrix& q1, const Matrix& q2,
                         const InnerProductWeight& w);

bool all_finite(const Matrix& m);

}  // namespace ubpod
