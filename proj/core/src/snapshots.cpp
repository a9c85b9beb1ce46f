#include "ubpod/snapshots.hpp"

#include <cmath>

#include "ubpod/io.hpp"

namespace ubpod {

std::string to_string(Quadrature q) {
  switch (q) {
    case Quadrature::kRectangle:
      return "rectangle";
    case Quadrature::kTrapezoid:
      return "trapezoid";
    case Quadrature::kMidpoint:
      return "midpoint";
  }
  return "rectangle";
}

Quadrature parse_quadrature(const std::string& name) {
  if (name == "rectangle") return Quadrature::kRectangle;
  if (name == "trapezoid") return Quadrature::kTrapezoid;
  if (name == "midpoint") return Quadrature::kMidpoint;
  throw ValidationError("unknown quadrature '" + name +
                        "' (expected rectangle, trapezoid or midpoint)");
}

void SnapshotOptions::validate() const {
  if (!(dt > 0.0)) throw ValidationError("snapshots: dt must be positive");
  if (n_snapshots < 1) throw ValidationError("snapshots: need >= 1 snapshot");
  if (spacing < 1) throw ValidationError("snapshots: spacing must be >= 1");
  if (!(divergence_factor > 1.0)) {
    throw ValidationError("snapshots: divergence factor must exceed 1");
  }
}

int SnapshotMatrix::sources() const {
  return source.empty() ? 0 : source.back() + 1;
}

int SnapshotMatrix::per_source() const {
  const int s = sources();
  return s == 0 ? 0 : static_cast<int>(columns.cols()) / s;
}

std::uint64_t SnapshotMatrix::hash() const {
  std::uint64_t h = hash_matrix(columns);
  h = hash_matrix(weights, h);
  h = fnv1a(&dt, sizeof(dt), h);
  h = fnv1a(&spacing, sizeof(spacing), h);
  return fnv1a(&projector_hash, sizeof(projector_hash), h);
}

namespace {

// Propagates all initial states as one block and samples them.
SnapshotMatrix run_ensemble(const Propagator& prop,
                            const std::function<Matrix(const Matrix&)>& project,
                            const Matrix& initial, const InnerProductWeight& w,
                            const SnapshotOptions& opt, std::uint64_t proj_hash,
                            const char* what) {
  opt.validate();
  const Eigen::Index n = initial.rows();
  const int p = static_cast<int>(initial.cols());
  const int ns = opt.n_snapshots;
  SnapshotMatrix out;
  out.W = w;
  out.dt = opt.dt;
  out.spacing = opt.spacing;
  out.quadrature = opt.quadrature;
  out.projector_hash = proj_hash;
  out.columns.resize(n, static_cast<Eigen::Index>(p) * ns);
  out.times.resize(static_cast<Eigen::Index>(p) * ns);
  out.weights.resize(static_cast<Eigen::Index>(p) * ns);
  out.source.resize(static_cast<std::size_t>(p) * ns);

  const double h = opt.spacing * opt.dt;
  for (int j = 0; j < p; ++j) {
    for (int s = 0; s < ns; ++s) {
      const Eigen::Index c = static_cast<Eigen::Index>(j) * ns + s;
      out.times(c) = s * h;
      out.weights(c) =
          (opt.quadrature == Quadrature::kTrapezoid && s == 0) ? 0.5 * h : h;
      out.source[c] = j;
    }
  }

  const bool projected = static_cast<bool>(project);
  Matrix x = projected ? project(initial) : initial;
  Vector start(p);
  for (int j = 0; j < p; ++j) start(j) = w.norm(x.col(j));

  auto advance = [&](Matrix& y) {
    y = prop.step(y);
    if (projected && opt.project_every_step) y = project(y);
  };
  auto check = [&](const Matrix& y, int s) {
    if (!y.allFinite()) {
      throw NumericalError(std::string(what) + ": non-finite state at sample " +
                           std::to_string(s));
    }
    if (!projected) return;
    for (int j = 0; j < p; ++j) {
      if (start(j) > 0.0 && w.norm(y.col(j)) > opt.divergence_factor * start(j)) {
        throw NumericalError(std::string(what) +
                             ": state grew by more than the divergence factor "
                             "with the projector active (projector leakage)");
      }
    }
  };

  for (int s = 0; s < ns; ++s) {
    check(x, s);
    Matrix sample;
    int remaining = opt.spacing;
    if (opt.quadrature == Quadrature::kMidpoint) {
      Matrix next = x;
      advance(next);
      sample = 0.5 * (x + next);
      x = std::move(next);
      --remaining;
    } else {
      sample = x;
    }
    for (int j = 0; j < p; ++j) {
      const Eigen::Index c = static_cast<Eigen::Index>(j) * ns + s;
      out.columns.col(c) = std::sqrt(out.weights(c)) * sample.col(j);
    }
    if (s + 1 < ns) {
      for (int k = 0; k < remaining; ++k) advance(x);
    }
  }
  return out;
}

}  // namespace

SnapshotMatrix impulse_response(const StateSpaceSystem& sys,
                                const StableProjector* projector,
                                const SnapshotOptions& options) {
  if (sys.B.rows() != sys.states()) {
    throw ValidationError("impulse_response: B has wrong row count");
  }
  const Propagator prop(sys.A, options.dt, options.scheme);
  std::function<Matrix(const Matrix&)> project;
  std::uint64_t h = 0;
  if (projector != nullptr && !projector->empty()) {
    project = [projector](const Matrix& y) { return projector->apply(y); };
    h = projector->hash();
  }
  return run_ensemble(prop, project, sys.B, sys.W, options, h,
                      "impulse_response");
}

SnapshotMatrix adjoint_response(const StateSpaceSystem& sys,
                                const StableProjector* projector,
                                const Matrix& initial_states,
                                const SnapshotOptions& options) {
  if (initial_states.rows() != sys.states()) {
    throw ValidationError("adjoint_response: initial states have wrong size");
  }
  const Propagator prop(sys.A.adjoint(), options.dt, options.scheme);
  std::function<Matrix(const Matrix&)> project;
  std::uint64_t h = 0;
  if (projector != nullptr && !projector->empty()) {
    project = [projector](const Matrix& y) { return projector->apply_adjoint(y); };
    h = projector->hash();
  }
  return run_ensemble(prop, project, initial_states, sys.W, options, h,
                      "adjoint_response");
}

PODBasis pod(const Matrix& data, const InnerProductWeight& w, int m) {
  if (data.rows() != w.size()) {
    throw ValidationError("pod: data and weight dimensions differ");
  }
  if (m < 0) throw ValidationError("pod: negative mode count");
  const SvdResult dec = svd(w.factor(data));
  int rank = 0;
  const double s0 = dec.s.size() > 0 ? dec.s(0) : 0.0;
  for (Eigen::Index i = 0; i < dec.s.size(); ++i) {
    if (dec.s(i) > 1e-12 * s0 && s0 > 0.0) ++rank;
  }
  if (m > rank) {
    throw ValidationError("pod: m=" + std::to_string(m) +
                          " exceeds the numerical rank; attainable m <= " +
                          std::to_string(rank));
  }
  PODBasis out;
  out.W = w;
  out.modes = w.factor_solve(dec.U.leftCols(m));
  out.energies = dec.s.head(rank).array().square();
  out.fractions.resize(rank);
  const double total = out.energies.sum();
  double acc = 0.0;
  for (int i = 0; i < rank; ++i) {
    acc += out.energies(i);
    out.fractions(i) = total > 0.0 ? acc / total : 0.0;
  }
  return out;
}

PODBasis pod(const SnapshotMatrix& x, int m) { return pod(x.columns, x.W, m); }

SnapshotMatrix output_snapshots(const StateSpaceSystem& sys,
                                const SnapshotMatrix& x) {
  SnapshotMatrix y = x;
  y.columns = sys.C * x.columns;
  y.W = sys.output_weight;
  return y;
}

OutputProjection output_projection(const Matrix& c, const PODBasis& theta) {
  if (theta.modes.rows() != c.rows()) {
    throw ValidationError("output_projection: modes live in a space of size " +
                          std::to_string(theta.modes.rows()) + ", C has " +
                          std::to_string(c.rows()) + " rows");
  }
  OutputProjection out;
  out.theta = theta.modes;
  out.order = theta.size();
  out.coefficient_map = theta.W.apply(theta.modes).transpose() * c;
  out.projected_output = theta.modes * out.coefficient_map;
  return out;
}

Matrix adjoint_initial_states(const StateSpaceSystem& sys,
                              const PODBasis* theta) {
  const InnerProductWeight& wo = sys.output_weight;
  Matrix out_basis;
  if (theta != nullptr) {
    if (theta->modes.rows() != sys.outputs()) {
      throw ValidationError("adjoint_initial_states: modes do not match C");
    }
    out_basis = wo.apply(theta->modes);
  } else {
    const int q = sys.outputs();
    out_basis = wo.apply(wo.factor_solve(Matrix::Identity(q, q)));
  }
  return sys.W.solve(sys.C.transpose() * out_basis);
}

}  // namespace ubpod
