#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ubpod/balpod.hpp"
#include "ubpod/io.hpp"
#include "ubpod/linops.hpp"

namespace ubpod {

/// Feedback convention: u = K a with K = -R^{-1} B' P.
struct LqrResult {
  Matrix K;
  Matrix P;
  double care_residual = 0.0;
  ComplexVector closed_loop;
  double abscissa = 0.0;
};

/// Smallest singular value of [lambda I - A, B] over the unstable
/// eigenvalues, relative to |[A B]|. Returns +inf when A is stable.
double stabilizability_margin(const Matrix& a, const Matrix& b);
/// Dual test on [lambda I - A; C].
double detectability_margin(const Matrix& a, const Matrix& c);

LqrResult lqr_gain(const Matrix& a, const Matrix& b, const Matrix& q,
                   const Matrix& r);

/// Q = C~' W_out C~ (output energy) on the full-output map.
Matrix energy_weight(const ReducedModel& model);

/// Gain on the whole reduced model with Q = energy_weight and R = c I.
LqrResult lqr_gain(const ReducedModel& model, double c);

/// Gain from the unstable block alone, zero-padded to the model width; the
/// closed-loop spectrum reported is that of the whole reduced model.
LqrResult lqr_gain_unstable_only(const ReducedModel& model, double c);

struct SensorMap {
  /// M [C~_u C~_s].
  Matrix cbar;
  std::vector<int> rows;
  /// Relative PBH margin per unstable eigenvalue of the reduced model.
  std::vector<double> pbh_margins;
};

/// Picks full-output rows; throws if an unstable mode is unobservable.
SensorMap sensor_map(const ReducedModel& model, const std::vector<int>& rows,
                     double pbh_tol = 1e-8);

struct NoiseModel {
  Matrix q_w;
  Matrix r_v;
  int samples = 0;
  /// Weight given to the diagonal when samples < dimension.
  double shrinkage = 0.0;
  bool regularized = false;
  std::vector<std::string> warnings;
};

/// Raw second moments of w = f(a) - A~ a and v = y - C_bar a over the
/// trajectory, with a = Psi' W x. `deviations` are states minus the steady
/// state; `sensor_data` holds the measured outputs column by column.
NoiseModel estimate_noise(const ReducedModel& model, const Matrix& cbar,
                          const Matrix& deviations,
                          const std::function<Vector(const Vector&)>& reduced_rhs,
                          const Matrix& sensor_data);

/// a -> Psi' W f(x_ss + Phi a): the nonlinear right-hand side in modal
/// coordinates.
std::function<Vector(const Vector&)> galerkin_rhs(
    const ReducedModel& model, const NonlinearDynamics& dyn,
    const Vector& steady_state);

struct KalmanResult {
  Matrix L;
  Matrix P;
  double care_residual = 0.0;
  ComplexVector observer_poles;
  double abscissa = 0.0;
};

/// L = P C' R_v^{-1} from the filter Riccati equation.
KalmanResult kalman_gain(const Matrix& a, const Matrix& cbar, const Matrix& q_w,
                         const Matrix& r_v);

/// Observer-controller pair acting on a plant through Psi' W and sensor rows.
struct Compensator {
  Matrix a;  // A~
  Matrix b;  // B~
  Matrix K;
  Matrix L;
  Matrix cbar;
  std::vector<int> sensor_rows;
  /// Psi' W (order x n).
  Matrix projection;
};

/// Checks spec(A~ + B~K) and, when L is non-empty, spec(A~ - L C_bar).
Compensator make_compensator(const ReducedModel& model, const Matrix& k,
                             const Matrix& l = Matrix(),
                             const SensorMap& sensors = {});

enum class FeedbackMode { kFullState, kObserver };

std::string to_string(FeedbackMode mode);
FeedbackMode parse_feedback_mode(const std::string& name);

struct SimulationOptions {
  double dt = 0.01;
  double horizon = 200.0;
  /// Control switches on at this time; the observer starts from zero there.
  double turn_on = 0.0;
  /// Trace sampling in steps.
  int record_every = 10;
  /// Energy growth beyond this factor of the initial value stops the run.
  double blowup_factor = 1e6;
};

struct Trace {
  std::vector<double> t;
  std::vector<double> energy;
  Matrix a;      // order x samples
  Matrix a_hat;  // order x samples
  Matrix u;      // inputs x samples
  Matrix y;      // sensors x samples
  bool blew_up = false;
  std::string message;

  CsvTable table() const;
  /// Largest energy over samples with t >= from.
  double max_energy_after(double from) const;
};

/// Runs the plant (linear when `plant.nonlinear` is empty, else the
/// nonlinear stepper) with the compensator in the loop. `x0` is the absolute
/// initial state; deviations are taken about `steady_state` (zero for linear
/// plants).
Trace closed_loop_simulate(const StateSpaceSystem& plant,
                           const Compensator& comp, FeedbackMode mode,
                           const Vector& x0, const Vector& steady_state,
                           const SimulationOptions& options);

/// Dense matrix of the coupled linear plant and compensator.
Matrix closed_loop_matrix(const StateSpaceSystem& plant,
                          const Compensator& comp, FeedbackMode mode);

}  // namespace ubpod
