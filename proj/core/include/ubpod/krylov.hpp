#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "ubpod/linops.hpp"

namespace ubpod {

using VectorMap = std::function<Vector(const Vector&)>;

struct GmresOptions {
  double tol = 1e-6;
  int max_iter = 1000;
  int restart = 50;
};

struct GmresResult {
  Vector x;
  /// Relative residual |b - Ax|/|b| after each iteration, starting with the
  /// initial guess.
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
  /// A full restart cycle made no progress.
  bool stagnated = false;
};

/// Restarted GMRES with modified Gram-Schmidt plus one reorthogonalization
/// pass and Givens rotations.
GmresResult gmres(const VectorMap& apply, const Vector& b,
                  const GmresOptions& options = {},
                  const Vector& x0 = Vector());

/// Forward difference [g(x + e v) - g(x)] / e with e = eps0 (1 + |x|) / |v|.
/// `gx` may carry a precomputed g(x). A zero direction gives zero.
Vector jacobian_vector(const VectorMap& g, const Vector& x, const Vector& v,
                       double eps0 = std::sqrt(
                           std::numeric_limits<double>::epsilon()),
                       const Vector* gx = nullptr);

}  // namespace ubpod
