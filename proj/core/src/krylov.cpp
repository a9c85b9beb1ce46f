#include "ubpod/krylov.hpp"

#include <cmath>

namespace ubpod {

GmresResult gmres(const VectorMap& apply, const Vector& b,
                  const GmresOptions& options, const Vector& x0) {
  if (!b.allFinite()) throw ValidationError("gmres: non-finite right-hand side");
  if (options.tol <= 0.0 || options.restart < 1 || options.max_iter < 0) {
    throw ValidationError("gmres: invalid options");
  }
  const Eigen::Index n = b.size();
  GmresResult out;
  out.x = x0.size() == n ? x0 : Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x.setZero();
    out.residuals.push_back(0.0);
    out.converged = true;
    return out;
  }

  const int m = options.restart;
  Matrix v(n, m + 1);
  Matrix h = Matrix::Zero(m + 1, m);
  Vector cs(m), sn(m), g(m + 1);
  double previous_cycle = std::numeric_limits<double>::infinity();

  while (true) {
    const Vector r = out.x.isZero(0.0) ? b : Vector(b - apply(out.x));
    const double beta = r.norm();
    const double rel0 = beta / bnorm;
    if (out.residuals.empty() || out.residuals.back() != rel0) {
      out.residuals.push_back(rel0);
    }
    if (rel0 <= options.tol) {
      out.converged = true;
      return out;
    }
    if (out.iterations >= options.max_iter) return out;
    if (rel0 >= previous_cycle * (1.0 - 1e-12)) {
      out.stagnated = true;
      return out;
    }
    previous_cycle = rel0;

    v.col(0) = r / beta;
    h.setZero();
    g.setZero();
    g(0) = beta;
    int k = 0;
    bool done = false;
    for (int j = 0; j < m && out.iterations < options.max_iter; ++j) {
      Vector w = apply(v.col(j));
      const double wnorm0 = w.norm();
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double c = v.col(i).dot(w);
          h(i, j) += c;
          w -= c * v.col(i);
        }
      }
      const double hnext = w.norm();
      h(j + 1, j) = hnext;
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * h(i, j) + sn(i) * h(i + 1, j);
        h(i + 1, j) = -sn(i) * h(i, j) + cs(i) * h(i + 1, j);
        h(i, j) = t;
      }
      const double denom = std::hypot(h(j, j), h(j + 1, j));
      if (denom == 0.0) {
        cs(j) = 1.0;
        sn(j) = 0.0;
      } else {
        cs(j) = h(j, j) / denom;
        sn(j) = h(j + 1, j) / denom;
      }
      h(j, j) = denom;
      h(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      ++out.iterations;
      k = j + 1;
      const double rel = std::abs(g(j + 1)) / bnorm;
      out.residuals.push_back(rel);
      const bool breakdown = hnext <= 1e-14 * std::max(wnorm0, 1e-300);
      if (rel <= options.tol || breakdown) {
        done = true;
        break;
      }
      v.col(j + 1) = w / hnext;
    }
    if (k > 0) {
      const Vector y = h.topLeftCorner(k, k)
                           .triangularView<Eigen::Upper>()
                           .solve(g.head(k));
      out.x += v.leftCols(k) * y;
    }
    if (!out.x.allFinite()) throw NumericalError("gmres: non-finite iterate");
    if (done) {
      const double rel = (b - apply(out.x)).norm() / bnorm;
      out.residuals.back() = rel;
      out.converged = rel <= std::max(options.tol, 1e-13);
      if (out.converged) return out;
    }
  }
}

Vector jacobian_vector(const VectorMap& g, const Vector& x, const Vector& v,
                       double eps0, const Vector* gx) {
  if (!(eps0 > 0.0)) throw ValidationError("jacobian_vector: eps must be > 0");
  if (!v.allFinite()) throw ValidationError("jacobian_vector: non-finite direction");
  const double vnorm = v.norm();
  if (vnorm == 0.0) return Vector::Zero(x.size());
  const double eps = eps0 * (1.0 + x.norm()) / vnorm;
  const Vector base = gx != nullptr ? *gx : g(x);
  const Vector shifted = g(x + eps * v);
  return (shifted - base) / eps;
}

}  // namespace ubpod
