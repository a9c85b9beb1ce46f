#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "ubpod/krylov.hpp"
#include "ubpod/linops.hpp"

namespace ubpod {

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("expm: non-square");
  if (!a.allFinite()) throw ValidationError("expm: non-finite input");
  if (a.rows() == 0) return a;
  return a.exp();
}

Propagator::Propagator(const LinearOperator& a, double dt, Scheme scheme)
    : op_(a), dt_(dt), scheme_(scheme) {
  if (!(dt > 0.0)) throw ValidationError("propagator: dt must be positive");
  if (!op_.is_dense()) {
    if (scheme == Scheme::kExactExpm) {
      throw ValidationError("exact-expm stepping needs a dense operator");
    }
    return;
  }
  const int n = op_.size();
  const Matrix& am = op_.matrix();
  if (scheme == Scheme::kExactExpm) {
    m_ = expm(dt * am);
    return;
  }
  const Matrix id = Matrix::Identity(n, n);
  Eigen::PartialPivLU<Matrix> lu(id - 0.5 * dt * am);
  if (n > 0 && !(lu.rcond() > 1e-14)) {
    throw NumericalError(
        "propagator: singular Crank-Nicolson factor (dt * lambda = 2)");
  }
  implicit_inv_ = lu.inverse();
  m_ = implicit_inv_ * (id + 0.5 * dt * am);
}

Vector Propagator::step(const Vector& x) const {
  if (x.size() != op_.size()) throw ValidationError("propagator: wrong size");
  if (op_.is_dense()) return m_ * x;
  const Vector rhs = x + 0.5 * dt_ * op_.apply(x);
  const double h = 0.5 * dt_;
  const LinearOperator& op = op_;
  GmresOptions opt;
  opt.tol = 1e-13;
  opt.restart = 100;
  const GmresResult res = gmres(
      [&](const Vector& v) -> Vector { return v - h * op.apply(v); }, rhs, opt,
      x);
  if (!res.converged) {
    throw NumericalError("propagator: implicit stage did not converge");
  }
  return res.x;
}

Matrix Propagator::step(const Matrix& x) const {
  if (x.rows() != op_.size()) throw ValidationError("propagator: wrong size");
  if (op_.is_dense()) return m_ * x;
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.col(j) = step(Vector(x.col(j)));
  return y;
}

Propagator Propagator::adjoint() const {
  return Propagator(op_.adjoint(), dt_, scheme_);
}

Vector propagate(const LinearOperator& a, const Vector& x, double dt,
                 Scheme scheme) {
  return Propagator(a, dt, scheme).step(x);
}

NonlinearStepper::NonlinearStepper(const NonlinearDynamics& dyn, double dt)
    : dyn_(dyn), dt_(dt) {
  if (!(dt > 0.0)) throw ValidationError("stepper: dt must be positive");
  if (dyn.linear.rows() != dyn.linear.cols() || !dyn.remainder) {
    throw ValidationError("stepper: incomplete nonlinear dynamics");
  }
  const Eigen::Index n = dyn.linear.rows();
  const Matrix id = Matrix::Identity(n, n);
  implicit_.compute(id - 0.5 * dt * dyn.linear);
  if (n > 0 && !(implicit_.rcond() > 1e-14)) {
    throw NumericalError("stepper: singular Crank-Nicolson factor");
  }
  const Matrix inv = implicit_.inverse();
  explicit_half_ = inv * (id + 0.5 * dt * dyn.linear);
  implicit_inv_ = inv;
}

void NonlinearStepper::step(Vector& x, const Vector& forcing) {
  Vector g = dyn_.remainder(x);
  if (forcing.size() > 0) g += forcing;
  Vector explicit_term;
  if (have_previous_) {
    explicit_term = 1.5 * g - 0.5 * previous_;
  } else {
    explicit_term = g;
  }
  x = explicit_half_ * x + dt_ * (implicit_inv_ * explicit_term);
  previous_ = std::move(g);
  have_previous_ = true;
}

void NonlinearStepper::step(Vector& x) { step(x, Vector()); }

}  // namespace ubpod
