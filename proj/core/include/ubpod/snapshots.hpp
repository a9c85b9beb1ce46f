#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ubpod/linops.hpp"
#include "ubpod/spectral.hpp"

namespace ubpod {

/// Snapshot weighting. kRectangle scales every column by sqrt(spacing dt).
/// kTrapezoid halves the weight of the first sample of each run.
/// kMidpoint samples the average of consecutive steps, which with spacing 1
/// and Crank-Nicolson reproduces the continuous Gramian up to the horizon.
enum class Quadrature { kRectangle, kTrapezoid, kMidpoint };

std::string to_string(Quadrature q);
Quadrature parse_quadrature(const std::string& name);

struct SnapshotOptions {
  double dt = 0.01;
  int n_snapshots = 200;
  int spacing = 50;
  Quadrature quadrature = Quadrature::kRectangle;
  Scheme scheme = Scheme::kCrankNicolson;
  /// Project every step; otherwise only the initial condition is projected.
  bool project_every_step = true;
  /// Growth of |x|_W beyond this factor with an active projector is reported
  /// as projector leakage.
  double divergence_factor = 1e6;

  void validate() const;
  int n_steps() const { return n_snapshots * spacing; }
};

/// Weighted, time-stamped state columns; column order is source-major then
/// time.
struct SnapshotMatrix {
  Matrix columns;
  Vector times;
  /// Quadrature weight of each column (columns are already scaled by its
  /// square root).
  Vector weights;
  std::vector<int> source;
  InnerProductWeight W;
  double dt = 0.0;
  int spacing = 1;
  Quadrature quadrature = Quadrature::kRectangle;
  std::uint64_t projector_hash = 0;

  int sources() const;
  int per_source() const;
  std::uint64_t hash() const;
};

/// One run per input column from x(0) = P_s B e_j (or B e_j).
SnapshotMatrix impulse_response(const StateSpaceSystem& sys,
                                const StableProjector* projector,
                                const SnapshotOptions& options);

/// One run of the W-adjoint dynamics per column of `initial_states`, with the
/// adjoint projector applied to the initial state and (by default) every step.
SnapshotMatrix adjoint_response(const StateSpaceSystem& sys,
                                const StableProjector* projector,
                                const Matrix& initial_states,
                                const SnapshotOptions& options);

struct PODBasis {
  /// Orthonormal in `W`.
  Matrix modes;
  Vector energies;
  /// Cumulative energy fraction captured by the leading k modes.
  Vector fractions;
  InnerProductWeight W;

  int size() const { return static_cast<int>(modes.cols()); }
};

/// Leading left singular vectors of F X mapped back by F^{-1}.
PODBasis pod(const Matrix& data, const InnerProductWeight& w, int m);
PODBasis pod(const SnapshotMatrix& x, int m);

/// Output snapshots C X, weighted by the system's output weight.
SnapshotMatrix output_snapshots(const StateSpaceSystem& sys,
                                const SnapshotMatrix& x);

struct OutputProjection {
  /// Theta' W_out C: maps a state to the m output coefficients.
  Matrix coefficient_map;
  /// Theta Theta' W_out C: the projected output.
  Matrix projected_output;
  Matrix theta;
  int order = 0;
};

OutputProjection output_projection(const Matrix& c, const PODBasis& theta);

/// Initial states for the adjoint runs: W^{-1} C' W_out Theta for an output
/// projection, or W^{-1} C' F_out' for the full output.
Matrix adjoint_initial_states(const StateSpaceSystem& sys,
                              const PODBasis* theta);

}  // namespace ubpod
