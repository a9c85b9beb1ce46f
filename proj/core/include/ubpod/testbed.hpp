#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ubpod/linops.hpp"
#include "ubpod/steady.hpp"

namespace ubpod {

struct RandomLtiSpec {
  int n = 8;
  int n_u = 2;
  int inputs = 1;
  int outputs = 1;
  /// Real parts of the unstable eigenvalues are drawn from this interval.
  double unstable_min = 0.1;
  double unstable_max = 1.0;
  /// Real parts of the stable eigenvalues.
  double stable_min = -5.0;
  double stable_max = -0.2;
  /// Imaginary parts of complex pairs.
  double imag_min = 0.5;
  double imag_max = 3.0;
  /// Condition number of the eigenvector matrix.
  double condition = 10.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RandomLti {
  StateSpaceSystem sys;
  /// Prescribed eigenvalues, sorted by decreasing real part.
  ComplexVector eigenvalues;
  /// Real block-diagonal form; A = V Lambda V^{-1}.
  Matrix lambda;
  Matrix v;
  /// Exact right and left unstable bases (left' right = I).
  Matrix right_unstable;
  Matrix left_unstable;
};

/// A = V Lambda V^{-1} with Lambda in real block form: n_u eigenvalues with
/// positive real parts and the rest stable; one pair per two slots while
/// room remains. B and C are Gaussian.
RandomLti random_lti(const RandomLtiSpec& spec);

enum class Boundary { kClamped, kPeriodic };

std::string to_string(Boundary b);
Boundary parse_boundary(const std::string& name);

/// Two-field reaction-advection-diffusion system with a rotating linear
/// coupling and cubic saturation:
///   u_t = du u_xx - c u_x + m(x) u - omega v - k (u^2 + v^2) u + s(x) + b(x) f
///   v_t = dv v_xx - c v_x + omega u + m(x) v - k (u^2 + v^2) v
/// with growth m(x) = mu exp(-((x - x_g)/w_g)^2) - d and source
/// s(x) = s0 exp(-((x - x_s)/w_s)^2). State ordering is [u; v].
struct HopfSpec {
  int grid = 64;
  double length = 11.5;
  Boundary boundary = Boundary::kClamped;
  double mu = 1.6;
  double diffusion_u = 0.5;
  double diffusion_v = 0.25;
  double advection = 1.0;
  double frequency = 1.0;
  double saturation = 1.0;
  double growth_center = 3.0;
  double growth_width = 2.0;
  double damping = 0.1;
  double source_amplitude = 0.3;
  double source_center = 2.5;
  double source_width = 0.5;
  double actuator_center = 1.0;
  double actuator_width = 0.3;
  std::vector<double> sensor_locations{3.0, 5.0};
  std::uint64_t seed = 1;

  void validate() const;
};

class HopfPde {
 public:
  explicit HopfPde(HopfSpec spec);

  const HopfSpec& spec() const { return spec_; }
  int grid() const { return spec_.grid; }
  int states() const { return 2 * spec_.grid; }
  double spacing() const { return h_; }
  const Vector& nodes() const { return x_; }

  /// Right-hand side without input.
  Vector rhs(const Vector& state) const;
  Matrix jacobian(const Vector& state) const;
  Vector jacobian_action(const Vector& state, const Vector& v) const;
  const NonlinearDynamics& dynamics() const { return dyn_; }

  /// Gaussian actuator acting on the u field (n x 1).
  const Matrix& actuator() const { return b_; }
  /// Output rows (indices into the full-state output) of the point sensors.
  std::vector<int> sensor_rows() const;
  /// Grid quadrature weights.
  InnerProductWeight weight() const;
  double energy(const Vector& deviation) const;

  /// Linearization about `state`: A = Jacobian, B = actuator, C = I, output
  /// weight = state weight; the nonlinear dynamics are attached.
  StateSpaceSystem linearization(const Vector& state) const;

  /// Small random state, deterministic in the spec seed.
  Vector random_state(double amplitude) const;

 private:
  HopfSpec spec_;
  double h_;
  Vector x_;
  Vector growth_;
  Vector source_;
  Matrix linear_;
  Matrix b_;
  NonlinearDynamics dyn_;
};

/// Newton-GMRES steady state, started from `guess` (zero if empty).
NewtonReport hopf_steady_state(const HopfPde& pde, double dt, int steps = 50,
                               const Vector& guess = Vector(),
                               bool line_search = true);

struct HopfScan {
  SteadyBranch branch;
  /// Leading eigenvalue real parts at the bracket ends from a dense solve.
  double lower_real = 0.0;
  double upper_real = 0.0;
  bool confirmed = false;
};

/// Steady branch over mu in [mu_min, mu_max] with the Hopf bracket.
HopfScan hopf_scan(const HopfSpec& spec, double mu_min, double mu_max,
                   double step, double dt = 0.01, int steps = 50);

struct LimitCycle {
  /// State at the end of the run.
  Vector state;
  /// Max and min of |x - x_ss|_W over the sampling window.
  double amplitude = 0.0;
  double minimum = 0.0;
  /// States sampled over the window (every `sample_every` steps).
  Matrix samples;
  std::vector<double> times;
};

/// Marches from x_ss plus a small perturbation through a transient, then
/// records a window of the saturated oscillation.
LimitCycle approach_limit_cycle(const HopfPde& pde, const Vector& steady_state,
                                double dt, double transient, double window,
                                int sample_every = 10,
                                double perturbation = 1e-3);

}  // namespace ubpod
