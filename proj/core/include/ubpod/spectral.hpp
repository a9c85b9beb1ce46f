#pragma once

#include <cstdint>

#include "ubpod/linops.hpp"

namespace ubpod {

/// Right and left bases with Psi' W Phi = I.
struct BiorthogonalPair {
  Matrix phi;
  Matrix psi;
  InnerProductWeight W;

  int size() const { return static_cast<int>(phi.cols()); }
  /// |Psi' W Phi - I|_F.
  double biorthogonality_error() const;
};

enum class Side { kRight, kLeft };

struct EigenspaceOptions {
  /// Largest admissible number of unstable eigenvalues.
  int k_max = 6;
  /// Extra block columns beyond k_max used to separate the unstable part.
  int oversample = 4;
  double dt = 0.01;
  Scheme scheme = Scheme::kCrankNicolson;
  /// Time advanced between orthonormalizations.
  double cycle_time = 1.0;
  /// Minimum integration time before convergence is accepted; negative means
  /// 20 / min Re(lambda_u) estimated from the current Ritz values.
  double settle_time = -1.0;
  double max_settle_time = 400.0;
  /// Tolerance on the subspace-angle change between cycles.
  double tol = 1e-8;
  int max_cycles = 20000;
  std::uint64_t seed = 1;
};

struct EigenspaceResult {
  /// W-orthonormal basis of the unstable invariant subspace (n x n_u).
  Matrix basis;
  /// Eigenvalues of the compressed operator on `basis`.
  ComplexVector ritz_values;
  /// Ritz values of the whole iteration block.
  ComplexVector block_ritz_values;
  int n_unstable = 0;
  int cycles = 0;
  double time = 0.0;
  double subspace_change = 0.0;
  /// |A Q - Q H|_W / |A|_est for the returned basis.
  double residual = 0.0;
};

/// Block subspace iteration by time stepping with Rayleigh-Ritz extraction.
/// The left space is the right unstable space of the W-adjoint.
EigenspaceResult unstable_eigenspace(const StateSpaceSystem& sys, Side side,
                                     const EigenspaceOptions& options = {});

/// Phi is W-orthonormalized (positive R diagonal); the scaling is absorbed
/// into Psi so that Psi' W Phi = I. Spans are unchanged.
BiorthogonalPair biorthonormalize(const Matrix& phi, const Matrix& psi,
                                  const InnerProductWeight& w);

/// P_s x = x - Phi (Psi' W x), P_s* z = z - Psi (Phi' W z).
class StableProjector {
 public:
  StableProjector() = default;
  explicit StableProjector(BiorthogonalPair pair);

  bool empty() const { return pair_.size() == 0; }
  const BiorthogonalPair& pair() const { return pair_; }

  Matrix apply(const Matrix& x) const;
  Matrix apply_adjoint(const Matrix& z) const;
  /// Psi' W x: the unstable coordinates removed by apply().
  Matrix unstable_coordinates(const Matrix& x) const;

  std::uint64_t hash() const;

 private:
  BiorthogonalPair pair_;
  Matrix psi_w_;  // Psi' W
  Matrix phi_w_;  // Phi' W
};

StableProjector stable_projector(const BiorthogonalPair& pair);

struct UnstablePair {
  BiorthogonalPair pair;
  EigenspaceResult right;
  EigenspaceResult left;
};

/// Right and left extraction followed by biorthonormalization.
UnstablePair extract_unstable_pair(const StateSpaceSystem& sys,
                                   const EigenspaceOptions& options = {});

}  // namespace ubpod
