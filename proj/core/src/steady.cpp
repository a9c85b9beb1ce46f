#include "ubpod/steady.hpp"

#include <cmath>
#include <memory>

namespace ubpod {

void FixedPointProblem::validate() const {
  if (!advance) throw ValidationError("fixed point: no time stepper");
  if (steps < 1) throw ValidationError("fixed point: T must be >= 1");
  if (!(eps0 > 0.0)) throw ValidationError("fixed point: eps must be > 0");
  if (!(tol > 0.0)) throw ValidationError("fixed point: tol must be > 0");
  if (max_newton < 1 || max_halvings < 0) {
    throw ValidationError("fixed point: invalid iteration caps");
  }
}

Vector FixedPointProblem::flow(const Vector& x) const {
  return advance(x, steps);
}

Vector FixedPointProblem::residual(const Vector& x) const {
  return x - flow(x);
}

FixedPointProblem fixed_point_problem(const NonlinearDynamics& dyn, double dt,
                                      int steps) {
  auto stepper = std::make_shared<NonlinearStepper>(dyn, dt);
  FixedPointProblem p;
  p.steps = steps;
  p.advance = [stepper](const Vector& x, int n) {
    Vector y = x;
    stepper->reset();
    for (int k = 0; k < n; ++k) stepper->step(y);
    return y;
  };
  return p;
}

namespace {

double scaled_norm(const Vector& g) {
  return g.size() > 0 ? g.norm() / std::sqrt(static_cast<double>(g.size()))
                      : 0.0;
}

}  // namespace

NewtonReport newton_gmres(const FixedPointProblem& problem,
                          const Vector& guess) {
  problem.validate();
  if (!guess.allFinite()) throw ValidationError("newton: non-finite guess");
  NewtonReport rep;
  rep.x = guess;
  const VectorMap g = [&problem](const Vector& x) { return problem.residual(x); };
  Vector gx = g(rep.x);
  double res = scaled_norm(gx);
  rep.residuals.push_back(res);
  while (res > problem.tol) {
    if (rep.iterations >= problem.max_newton) {
      throw NumericalError("newton: no convergence in " +
                           std::to_string(problem.max_newton) +
                           " iterations (residual " + std::to_string(res) + ")");
    }
    GmresOptions go = problem.gmres;
    go.tol = std::max(1e-13, std::min(problem.gmres.tol, gx.norm()));
    const Vector x = rep.x;
    const VectorMap jv = [&](const Vector& v) {
      return jacobian_vector(g, x, v, problem.eps0, &gx);
    };
    const GmresResult lin = gmres(jv, -gx, go);
    rep.gmres_iterations.push_back(lin.iterations);
    if (!lin.x.allFinite()) throw NumericalError("newton: GMRES diverged");

    double lambda = 1.0;
    Vector trial = x + lin.x;
    Vector gt = g(trial);
    double rt = scaled_norm(gt);
    if (problem.line_search) {
      int halvings = 0;
      while (!(rt < res) && halvings < problem.max_halvings) {
        lambda *= 0.5;
        ++halvings;
        trial = x + lambda * lin.x;
        gt = g(trial);
        rt = scaled_norm(gt);
      }
      if (!(rt < res)) {
        throw NumericalError("newton: line search failed after " +
                             std::to_string(problem.max_halvings) +
                             " halvings (residual " + std::to_string(res) + ")");
      }
    } else if (!std::isfinite(rt)) {
      throw NumericalError("newton: residual became non-finite");
    }
    rep.x = std::move(trial);
    gx = std::move(gt);
    res = rt;
    rep.step_lengths.push_back(lambda);
    rep.residuals.push_back(res);
    ++rep.iterations;
  }
  rep.converged = true;
  return rep;
}

SteadyBranch continuation(const ProblemFamily& family,
                          const JacobianFamily& jacobian, const Vector& guess,
                          const ContinuationOptions& options) {
  if (!(options.step > 0.0)) throw ValidationError("continuation: step must be > 0");
  if (!(options.stop >= options.start)) {
    throw ValidationError("continuation: stop must not precede start");
  }
  SteadyBranch branch;
  auto solve_at = [&](double mu, const Vector& x0) {
    const NewtonReport rep = newton_gmres(family(mu), x0);
    BranchPoint p;
    p.parameter = mu;
    p.state = rep.x;
    p.converged = rep.converged;
    p.residual = rep.residual();
    p.newton_iterations = rep.iterations;
    const ComplexVector ev = eigenvalues(jacobian(mu, rep.x));
    p.leading = ev.head(std::min<Eigen::Index>(options.n_leading, ev.size()));
    return p;
  };

  try {
    branch.points.push_back(solve_at(options.start, guess));
  } catch (const NumericalError& e) {
    branch.message = std::string("no converged start: ") + e.what();
    return branch;
  }
  const int n_targets = static_cast<int>(
      std::floor((options.stop - options.start) / options.step + 1e-9));
  for (int k = 1; k <= n_targets; ++k) {
    const double target = options.start + k * options.step;
    double h = target - branch.points.back().parameter;
    int halvings = 0;
    while (branch.points.back().parameter < target - 1e-12 * options.step) {
      const double mu = std::min(target, branch.points.back().parameter + h);
      try {
        branch.points.push_back(solve_at(mu, branch.points.back().state));
      } catch (const NumericalError& e) {
        if (++halvings > options.max_halvings) {
          branch.message = "terminated at parameter " + std::to_string(mu) +
                           ": " + e.what();
          goto done;
        }
        h *= 0.5;
      }
    }
  }
  branch.complete = true;
done:
  for (std::size_t i = 1; i < branch.points.size(); ++i) {
    const auto& p0 = branch.points[i - 1];
    const auto& p1 = branch.points[i];
    if (p0.leading.size() == 0 || p1.leading.size() == 0) continue;
    const double r0 = p0.leading(0).real();
    const double r1 = p1.leading(0).real();
    if ((r0 < 0.0) != (r1 < 0.0)) {
      branch.bracket = std::make_pair(p0.parameter, p1.parameter);
      break;
    }
  }
  return branch;
}

}  // namespace ubpod
