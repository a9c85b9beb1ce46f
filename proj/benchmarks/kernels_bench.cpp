// Timings of the dense kernels and the pipeline steps that dominate a run.

#include <benchmark/benchmark.h>

#include <random>

#include "ubpod/balpod.hpp"
#include "ubpod/krylov.hpp"
#include "ubpod/linops.hpp"
#include "ubpod/oracle.hpp"
#include "ubpod/snapshots.hpp"
#include "ubpod/spectral.hpp"
#include "ubpod/testbed.hpp"

namespace {

using namespace ubpod;

Matrix gaussian(int rows, int cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = d(rng);
  }
  return m;
}

// Random matrix shifted so its spectrum sits left of -0.5.
Matrix stable(int n, unsigned seed) {
  Matrix a = gaussian(n, n, seed) / std::sqrt(static_cast<double>(n));
  return a - (spectral_abscissa(a) + 0.5) * Matrix::Identity(n, n);
}

void BM_Lyapunov(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix a = stable(n, 1);
  const Matrix b = gaussian(n, 2, 2);
  const Matrix q = b * b.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(solve_lyapunov(a, q));
}
BENCHMARK(BM_Lyapunov)->Arg(20)->Arg(80)->Arg(160)->Unit(benchmark::kMillisecond);

void BM_Care(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  // A few unstable modes and enough inputs to keep the pair well stabilizable.
  const Matrix a = stable(n, 3) + 0.7 * Matrix::Identity(n, n);
  const int m = n / 4 + 1;
  const Matrix b = gaussian(n, m, 4);
  const Matrix q = Matrix::Identity(n, n);
  const Matrix r = Matrix::Identity(m, m);
  for (auto _ : state) benchmark::DoNotOptimize(solve_care(a, b, q, r));
}
BENCHMARK(BM_Care)->Arg(22)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_Gmres(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix a = gaussian(n, n, 5) + 2.0 * std::sqrt(n) * Matrix::Identity(n, n);
  const Vector b = gaussian(n, 1, 6).col(0);
  const VectorMap apply = [&a](const Vector& x) { return Vector(a * x); };
  GmresOptions o;
  o.tol = 1e-10;
  for (auto _ : state) benchmark::DoNotOptimize(gmres(apply, b, o));
}
BENCHMARK(BM_Gmres)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_FrequencyGramians(benchmark::State& state) {
  const Matrix a = stable(10, 7);
  const Matrix b = gaussian(10, 2, 8);
  const Matrix c = gaussian(2, 10, 9);
  for (auto _ : state) benchmark::DoNotOptimize(freq_domain_gramians(a, b, c));
}
BENCHMARK(BM_FrequencyGramians)->Unit(benchmark::kMillisecond);

// Hopf plant at the default parameter, linearized about its steady state.
struct HopfSetup {
  HopfPde pde{HopfSpec{}};
  StateSpaceSystem sys;
  StableProjector projector;

  HopfSetup() {
    sys = pde.linearization(hopf_steady_state(pde, 0.01).x);
    projector = stable_projector(extract_unstable_pair(sys).pair);
  }
};

const HopfSetup& hopf() {
  static const HopfSetup setup;
  return setup;
}

void BM_HopfSteadyState(benchmark::State& state) {
  const HopfPde pde{HopfSpec{}};
  for (auto _ : state) benchmark::DoNotOptimize(hopf_steady_state(pde, 0.01));
}
BENCHMARK(BM_HopfSteadyState)->Unit(benchmark::kMillisecond);

void BM_HopfEigenspace(benchmark::State& state) {
  const StateSpaceSystem& sys = hopf().sys;
  for (auto _ : state) benchmark::DoNotOptimize(extract_unstable_pair(sys));
}
BENCHMARK(BM_HopfEigenspace)->Unit(benchmark::kMillisecond);

void BM_HopfImpulseSnapshots(benchmark::State& state) {
  const HopfSetup& h = hopf();
  SnapshotOptions so;
  so.n_snapshots = static_cast<int>(state.range(0));
  so.spacing = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(impulse_response(h.sys, &h.projector, so));
  }
}
BENCHMARK(BM_HopfImpulseSnapshots)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_HopfBalance(benchmark::State& state) {
  const HopfSetup& h = hopf();
  SnapshotOptions so;
  so.n_snapshots = 1000;
  so.spacing = 10;
  const SnapshotMatrix x = impulse_response(h.sys, &h.projector, so);
  const PODBasis theta = pod(output_snapshots(h.sys, x), 20);
  const SnapshotMatrix z = adjoint_response(
      h.sys, &h.projector, adjoint_initial_states(h.sys, &theta), so);
  for (auto _ : state) benchmark::DoNotOptimize(balance(x, z, 20));
}
BENCHMARK(BM_HopfBalance)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
