#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ubpod/linops.hpp"
#include "ubpod/snapshots.hpp"
#include "ubpod/spectral.hpp"

namespace ubpod {

struct BalanceResult {
  /// Balancing modes (n x r).
  Matrix phi;
  /// Adjoint modes (n x r), Psi' W Phi = I.
  Matrix psi;
  /// All numerically positive singular values of Z' W X.
  Vector hsv;
  /// Order actually returned (may exceed the request to keep a pair intact).
  int order = 0;
};

/// Balancing transformation from direct snapshots X and adjoint snapshots Z
/// (both already quadrature-weighted), via SVDs of the factored data. A
/// negative `r` keeps the full numerical rank.
BalanceResult balance(const Matrix& x, const Matrix& z,
                      const InnerProductWeight& w, int r,
                      double tie_tol = 1e-6);
BalanceResult balance(const SnapshotMatrix& x, const SnapshotMatrix& z, int r,
                      double tie_tol = 1e-6);

/// Block-diagonal reduced model on the unstable and stable subspaces.
struct ReducedModel {
  Matrix a_u, a_s;
  Matrix b_u, b_s;
  /// Full-output maps: C Phi_u and Theta Theta' W_out C Phi_s.
  Matrix c_u, c_s;
  /// Coefficient output of the stable block: Theta' W_out C Phi_s.
  Matrix chat_s;
  /// Theta' W_out C (m x n): output coefficients of a full state.
  Matrix coefficient_map;
  Vector hsv;
  Matrix phi_u, psi_u, phi_s, psi_s;
  InnerProductWeight W;
  InnerProductWeight output_weight;
  /// |Psi_s' W A Phi_u| / |A| and |Psi_u' W A Phi_s| / |A| before zeroing.
  double cross_su = 0.0;
  double cross_us = 0.0;
  std::map<std::string, std::string> provenance;

  int n_u() const { return static_cast<int>(a_u.rows()); }
  int r() const { return static_cast<int>(a_s.rows()); }
  int order() const { return n_u() + r(); }
  int inputs() const { return static_cast<int>(b_s.cols()); }
  int states() const { return static_cast<int>(phi_s.rows()); }

  /// diag(A_u, A_s).
  Matrix a() const;
  /// [B_u; B_s].
  Matrix b() const;
  /// [C_u C_s].
  Matrix c() const;
  /// diag(I, Chat_s).
  Matrix chat() const;
  /// [Phi_u Phi_s] and [Psi_u Psi_s].
  Matrix phi() const;
  Matrix psi() const;
  /// Largest cross-coupling ratio.
  double cross_coupling() const { return std::max(cross_su, cross_us); }
};

struct AssembleOptions {
  /// Cross-coupling above this fraction of |A| is flagged in `warnings`.
  double cross_tol = 1e-6;
};

/// `theta` may be null, meaning the full output is kept (Theta = F_out^{-1}).
ReducedModel assemble_rom(const StateSpaceSystem& sys,
                          const BiorthogonalPair& unstable,
                          const BalanceResult& stable, const PODBasis* theta,
                          const AssembleOptions& options = {},
                          std::vector<std::string>* warnings = nullptr);

/// a0 = [Psi_u Psi_s]' W x0.
Vector project_initial_state(const Vector& x0, const ReducedModel& model);

struct GramianDiagonals {
  Vector controllability;
  Vector observability;
};

/// Infinite-horizon Gramians of (A_s, B_s, Chat_s) by Lyapunov solves.
GramianDiagonals empirical_gramians(const ReducedModel& model);

struct ImpulseComparison {
  /// Per output channel, over all inputs: |y_full - y_model|_2.
  Vector l2_error;
  /// l2_error / |y_full|_2.
  Vector relative_error;
  Vector peak_error;
  /// Outputs sampled at the snapshot times (channel x sample, source-major).
  Matrix y_full;
  Matrix y_model;
};

/// Compares the stable-block model against the projected full impulse
/// response in the coefficient outputs; `x` are the impulse snapshots used
/// to build the model, replayed with the same sampling.
ImpulseComparison rom_impulse_compare(const ReducedModel& model,
                                      const SnapshotMatrix& x);

/// Directory layout: one matrix file per block plus model.json.
void save_model(const ReducedModel& model, const std::filesystem::path& dir);
ReducedModel load_model(const std::filesystem::path& dir);
std::uint64_t model_hash(const ReducedModel& model);

}  // namespace ubpod
