#include "ubpod/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ubpod/io.hpp"

namespace ubpod {

double BiorthogonalPair::biorthogonality_error() const {
  if (size() == 0) return 0.0;
  return (W.gram(psi, phi) - Matrix::Identity(size(), size())).norm();
}

namespace {

Matrix random_block(int n, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = normal(rng);
  }
  return x;
}

}  // namespace

EigenspaceResult unstable_eigenspace(const StateSpaceSystem& sys, Side side,
                                     const EigenspaceOptions& options) {
  const int n = sys.states();
  if (options.k_max < 0 || options.oversample < 1) {
    throw ValidationError("unstable_eigenspace: invalid block sizes");
  }
  if (!(options.dt > 0.0) || !(options.cycle_time > 0.0) ||
      !(options.tol > 0.0)) {
    throw ValidationError("unstable_eigenspace: invalid time or tolerance");
  }
  if (sys.W.size() != n) {
    throw ValidationError("unstable_eigenspace: weight dimension mismatch");
  }
  const InnerProductWeight& w = sys.W;
  const LinearOperator op = side == Side::kRight ? sys.A : sys.A.adjoint();
  const Propagator prop(op, options.dt, options.scheme);
  const int block = std::min(n, options.k_max + options.oversample);
  const int steps =
      std::max(1, static_cast<int>(std::lround(options.cycle_time / options.dt)));
  const double cycle_time = steps * options.dt;

  EigenspaceResult out;
  if (n == 0) return out;
  Matrix q = w_orthonormalize(random_block(n, block, options.seed), w);
  Matrix previous;
  int previous_nu = -1;
  double elapsed = 0.0;
  double a_est = 0.0;

  for (int cycle = 1; cycle <= options.max_cycles; ++cycle) {
    for (int s = 0; s < steps; ++s) q = prop.step(q);
    elapsed += cycle_time;
    if (!q.allFinite()) {
      throw NumericalError("unstable_eigenspace: iteration overflowed");
    }
    q = w_orthonormalize(q, w);
    const Matrix aq = op.apply(q);
    const Matrix h = w.gram(q, aq);
    const SchurResult schur = ordered_schur(h, SchurOrder::kUnstableFirst);
    q = q * schur.U;
    const int nu = schur.selected;
    const Matrix basis = q.leftCols(nu);

    double settle = options.settle_time;
    if (settle < 0.0) {
      double slowest = std::numeric_limits<double>::infinity();
      for (int i = 0; i < nu; ++i) {
        slowest = std::min(slowest, schur.values(i).real());
      }
      settle = nu > 0 ? std::min(20.0 / slowest, options.max_settle_time)
                      : 10.0 * cycle_time;
    }

    const double change =
        nu == previous_nu ? subspace_distance(basis, previous, w) : 1.0;
    out.subspace_change = change;
    previous = basis;
    previous_nu = nu;
    if (elapsed < settle || change >= options.tol) continue;

    if (nu > options.k_max) {
      throw ValidationError("unstable_eigenspace: " + std::to_string(nu) +
                            " unstable directions exceed k_max=" +
                            std::to_string(options.k_max));
    }
    out.basis = basis;
    out.n_unstable = nu;
    out.cycles = cycle;
    out.time = elapsed;
    const Matrix t11 = schur.T.topLeftCorner(nu, nu);
    out.ritz_values = eigenvalues(t11);
    out.block_ritz_values = eigenvalues(h);
    for (Eigen::Index j = 0; j < aq.cols(); ++j) {
      a_est = std::max(a_est, w.norm(aq.col(j)));
    }
    if (nu > 0 && a_est > 0.0) {
      const Matrix r = op.apply(basis) - basis * t11;
      out.residual = w.factor(r).norm() / a_est;
    }
    return out;
  }
  throw NumericalError(
      "unstable_eigenspace: no convergence within " +
      std::to_string(options.max_cycles) + " cycles (last subspace change " +
      std::to_string(out.subspace_change) + ")");
}

BiorthogonalPair biorthonormalize(const Matrix& phi, const Matrix& psi,
                                  const InnerProductWeight& w) {
  if (phi.cols() != psi.cols() || phi.rows() != psi.rows() ||
      phi.rows() != w.size()) {
    throw ValidationError("biorthonormalize: inconsistent dimensions");
  }
  BiorthogonalPair out;
  out.W = w;
  if (phi.cols() == 0) {
    out.phi = phi;
    out.psi = psi;
    return out;
  }
  out.phi = w_orthonormalize(phi, w);
  const Matrix m = w.gram(psi, out.phi);
  const Vector s = svd(m).s;
  if (!(s(s.size() - 1) > 1e-12 * s(0))) {
    throw NumericalError(
        "biorthonormalize: cross-Gramian is singular; the spaces are "
        "W-orthogonal or the dimension is wrong");
  }
  out.psi = m.partialPivLu().solve(psi.transpose()).transpose();
  return out;
}

StableProjector::StableProjector(BiorthogonalPair pair) : pair_(std::move(pair)) {
  if (pair_.size() > 0) {
    psi_w_ = pair_.W.apply(pair_.psi).transpose();
    phi_w_ = pair_.W.apply(pair_.phi).transpose();
  }
}

Matrix StableProjector::apply(const Matrix& x) const {
  if (empty()) return x;
  return x - pair_.phi * (psi_w_ * x);
}

Matrix StableProjector::apply_adjoint(const Matrix& z) const {
  if (empty()) return z;
  return z - pair_.psi * (phi_w_ * z);
}

Matrix StableProjector::unstable_coordinates(const Matrix& x) const {
  if (empty()) return Matrix(0, x.cols());
  return psi_w_ * x;
}

std::uint64_t StableProjector::hash() const {
  std::uint64_t h = hash_matrix(pair_.phi);
  h = hash_matrix(pair_.psi, h);
  return pair_.W.size() > 0 ? fnv1a(&h, sizeof(h), pair_.W.hash()) : h;
}

StableProjector stable_projector(const BiorthogonalPair& pair) {
  if (pair.size() > 0 && pair.biorthogonality_error() > 1e-8) {
    throw ValidationError("stable_projector: pair is not bi-orthonormal");
  }
  return StableProjector(pair);
}

UnstablePair extract_unstable_pair(const StateSpaceSystem& sys,
                                   const EigenspaceOptions& options) {
  UnstablePair out;
  out.right = unstable_eigenspace(sys, Side::kRight, options);
  EigenspaceOptions left_opts = options;
  left_opts.seed = options.seed + 1;
  out.left = unstable_eigenspace(sys, Side::kLeft, left_opts);
  if (out.right.n_unstable != out.left.n_unstable) {
    throw NumericalError("extract_unstable_pair: right and left extractions "
                         "found different unstable dimensions");
  }
  out.pair = biorthonormalize(out.right.basis, out.left.basis, sys.W);
  return out;
}

}  // namespace ubpod
