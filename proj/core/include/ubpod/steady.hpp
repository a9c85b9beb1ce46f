#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ubpod/krylov.hpp"
#include "ubpod/linops.hpp"

namespace ubpod {

/// Zero of g(x) = x - Phi_T(x), where Phi_T advances the nonlinear system by
/// `steps` time steps.
struct FixedPointProblem {
  /// State after the given number of time steps of the nonlinear system.
  std::function<Vector(const Vector&, int)> advance;
  int steps = 50;
  /// Finite-difference scale for Jacobian-vector products.
  double eps0 = std::sqrt(std::numeric_limits<double>::epsilon());
  /// Newton stops when |g|/sqrt(n) falls below this.
  double tol = 1e-10;
  int max_newton = 50;
  GmresOptions gmres;
  /// Halving line search on |g|; off reproduces plain Newton.
  bool line_search = true;
  int max_halvings = 8;

  void validate() const;
  Vector flow(const Vector& x) const;
  Vector residual(const Vector& x) const;
};

/// Problem stepped by Crank-Nicolson/Adams-Bashforth-2 on `dyn`. Each
/// evaluation restarts the multistep history, so Phi_T is a pure map.
FixedPointProblem fixed_point_problem(const NonlinearDynamics& dyn, double dt,
                                      int steps = 50);

struct NewtonReport {
  Vector x;
  /// |g|/sqrt(n) before each iteration and at the end.
  std::vector<double> residuals;
  std::vector<int> gmres_iterations;
  std::vector<double> step_lengths;
  int iterations = 0;
  bool converged = false;

  double residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
};

/// Inexact Newton with GMRES on finite-difference Jacobian actions. Throws
/// NumericalError when the iteration cap is reached or the line search fails.
NewtonReport newton_gmres(const FixedPointProblem& problem,
                          const Vector& guess);

struct BranchPoint {
  double parameter = 0.0;
  Vector state;
  bool converged = false;
  double residual = 0.0;
  int newton_iterations = 0;
  /// Leading eigenvalues of the linearization, largest real part first.
  ComplexVector leading;
};

struct SteadyBranch {
  std::vector<BranchPoint> points;
  /// Consecutive parameters across which the leading real part changes sign.
  std::optional<std::pair<double, double>> bracket;
  bool complete = false;
  std::string message;
};

struct ContinuationOptions {
  double start = 0.0;
  double stop = 1.0;
  double step = 0.1;
  /// Step halvings allowed after a Newton failure before terminating.
  int max_halvings = 4;
  int n_leading = 4;
};

/// Problem at parameter mu.
using ProblemFamily = std::function<FixedPointProblem(double)>;
/// Jacobian of the right-hand side at parameter mu and state x.
using JacobianFamily = std::function<Matrix(double, const Vector&)>;

/// Natural-parameter continuation from `guess` (converged first, at start).
SteadyBranch continuation(const ProblemFamily& family,
                          const JacobianFamily& jacobian, const Vector& guess,
                          const ContinuationOptions& options);

}  // namespace ubpod
