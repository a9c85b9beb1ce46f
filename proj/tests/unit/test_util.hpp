#pragma once

#include <cstdint>
#include <memory>
#include <random>

#include "ubpod/balpod.hpp"
#include "ubpod/linops.hpp"
#include "ubpod/snapshots.hpp"
#include "ubpod/spectral.hpp"
#include "ubpod/testbed.hpp"

namespace ubpod::testing {

inline Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
  }
  return m;
}

/// Random matrix shifted so its spectral abscissa is -margin.
inline Matrix random_stable(int n, std::uint64_t seed, double margin = 0.3) {
  Matrix a = random_matrix(n, n, seed);
  const double shift = spectral_abscissa(a) + margin;
  a -= shift * Matrix::Identity(n, n);
  return a;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Default hopf plant linearized about its steady state, with the shared
/// snapshot ensemble. Built once per test binary.
struct HopfPipeline {
  HopfPde pde{HopfSpec{}};
  NewtonReport newton;
  StateSpaceSystem sys;
  UnstablePair unstable;
  StableProjector projector;
  SnapshotOptions snap;
  SnapshotMatrix x;

  HopfPipeline() {
    newton = hopf_steady_state(pde, 0.01, 50);
    sys = pde.linearization(newton.x);
    unstable = extract_unstable_pair(sys);
    projector = stable_projector(unstable.pair);
    snap.dt = 0.01;
    snap.spacing = 10;
    snap.n_snapshots = 1000;
    snap.quadrature = Quadrature::kTrapezoid;
    x = impulse_response(sys, &projector, snap);
  }

  struct Projected {
    PODBasis theta;
    SnapshotMatrix z;
  };

  const Projected& projected(int m) {
    auto it = cache_.find(m);
    if (it == cache_.end()) {
      Projected p;
      p.theta = pod(output_snapshots(sys, x), m);
      p.z = adjoint_response(sys, &projector,
                             adjoint_initial_states(sys, &p.theta), snap);
      it = cache_.emplace(m, std::move(p)).first;
    }
    return it->second;
  }

  ReducedModel model(int m, int r) {
    const Projected& p = projected(m);
    return assemble_rom(sys, unstable.pair, balance(x, p.z, r), &p.theta);
  }

  static HopfPipeline& get() {
    static HopfPipeline instance;
    return instance;
  }

 private:
  std::map<int, Projected> cache_;
};

}  // namespace ubpod::testing
