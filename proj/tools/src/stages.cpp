#include "stages.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include "plant.hpp"
#include "ubpod/balpod.hpp"
#include "ubpod/control.hpp"
#include "ubpod/io.hpp"
#include "ubpod/oracle.hpp"
#include "ubpod/snapshots.hpp"
#include "ubpod/spectral.hpp"
#include "ubpod/steady.hpp"
#include "ubpod/testbed.hpp"

namespace ubpod::cli {

namespace {

// Window recorded after the run-in when a simulation starts on the limit
// cycle; its peak energy is the reference amplitude.
constexpr double kCycleWindow = 50.0;
// Leading eigenvalues reported by dense spectrum checks.
constexpr int kLeading = 6;

using Row = std::vector<std::string>;

std::string num(double v) { return format_number(v); }
std::string num(int v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

// Runs f(0..count-1) on up to `jobs` threads. Results are written by index,
// so the merge order never depends on scheduling.
void parallel_for(int count, int jobs, const std::function<void(int)>& f) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

CsvTable eigenvalue_table(const ComplexVector& ev, int limit = -1) {
  CsvTable t({"index", "real", "imag"});
  const Eigen::Index n =
      limit < 0 ? ev.size() : std::min<Eigen::Index>(limit, ev.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    t.add_row(std::vector<double>{static_cast<double>(i), ev(i).real(),
                                  ev(i).imag()});
  }
  return t;
}

class Summary {
 public:
  template <typename T>
  void add(const std::string& key, const T& value) {
    table_.add_row(Row{key, cell(value)});
    json_[key] = value;
  }
  const CsvTable& table() const { return table_; }
  const json& as_json() const { return json_; }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return num(v); }
  static std::string cell(bool v) { return flag(v); }
  static std::string cell(const std::string& v) { return v; }

  CsvTable table_{{"metric", "value"}};
  json json_ = json::object();
};

void finish(const StageRun& run, const Summary& s) {
  run.write_table("summary.csv", s.table());
  run.finish(s.as_json());
}

bool dense_ok(int n) { return n <= kDenseSizeCap; }

// Shared upstream state, loaded lazily by the stages that need it.
struct Upstream {
  const StageRun& run;
  const Plant& plant;

  Vector steady_state() const {
    const Matrix x = read_matrix(run.input("steady", "state.txt"));
    if (x.cols() != 1 || x.rows() != plant.states()) {
      throw ValidationError("steady state does not match the testbed size");
    }
    return x.col(0);
  }

  BiorthogonalPair pair(const StateSpaceSystem& sys) const {
    BiorthogonalPair p;
    p.phi = read_matrix(run.input("eigs", "phi_u.txt"));
    p.psi = read_matrix(run.input("eigs", "psi_u.txt"));
    p.W = sys.W;
    if (p.phi.rows() != sys.states() || p.psi.rows() != sys.states() ||
        p.phi.cols() != p.psi.cols()) {
      throw ValidationError("unstable bases do not match the testbed size");
    }
    return p;
  }

  std::optional<PODBasis> theta(const StateSpaceSystem& sys) const {
    if (run.config().snapshots.m == 0) return std::nullopt;
    return load_pod(run.input("snapshots", "theta"), sys.output_weight);
  }

  SnapshotMatrix snapshots(const std::string& which,
                           const StateSpaceSystem& sys) const {
    return load_snapshots(run.input("snapshots", which), sys.W);
  }

  ReducedModel model() const {
    return load_model(run.input("rom", "model"));
  }
};

std::vector<int> configured_sensors(const PipelineConfig& cfg,
                                    const Plant& plant) {
  return cfg.control.sensors.empty()
             ? plant.default_sensors()
             : cfg.control.sensors;
}

// ---------------------------------------------------------------------------

int stage_steady(const RunOptions& o) {
  StageRun run(o, "steady", {});
  const SteadyConfig& c = run.config().steady;
  const Plant plant(run.config());
  FixedPointProblem p = fixed_point_problem(plant.dynamics(), c.dt, c.steps);
  p.tol = c.tol;
  p.gmres.tol = c.gmres_tol;
  p.gmres.restart = c.gmres_restart;
  p.max_newton = c.max_newton;
  p.line_search = c.line_search;
  const NewtonReport nr =
      newton_gmres(p, Vector::Zero(plant.states()));

  write_matrix(run.output("state.txt"), Matrix(nr.x));
  CsvTable newton({"iteration", "residual", "gmres_iterations", "step_length"});
  for (std::size_t k = 0; k < nr.residuals.size(); ++k) {
    const bool step = k < nr.gmres_iterations.size();
    newton.add_row(Row{num(static_cast<int>(k)), num(nr.residuals[k]),
                       step ? num(nr.gmres_iterations[k]) : "",
                       step ? num(nr.step_lengths[k]) : ""});
  }
  run.write_table("newton.csv", newton);

  Summary s;
  s.add("states", plant.states());
  s.add("newton_iterations", nr.iterations);
  s.add("residual", nr.residual());
  s.add("converged", nr.converged);
  s.add("line_search", c.line_search);
  s.add("energy", plant.energy(nr.x));
  std::string detail;
  if (dense_ok(plant.states())) {
    const ComplexVector ev = eigenvalues(plant.dynamics().jacobian(nr.x));
    run.write_table("leading.csv", eigenvalue_table(ev, kLeading));
    s.add("abscissa", ev(0).real());
    detail = ", leading eigenvalue " + num(ev(0).real()) + " + " +
             num(std::abs(ev(0).imag())) + "i";
  }
  finish(run, s);
  std::cout << "steady: residual " << num(nr.residual()) << " after "
            << nr.iterations << " Newton iterations" << detail << "\n";
  return 0;
}

int stage_eigs(const RunOptions& o) {
  StageRun run(o, "eigs", {"steady"});
  const PipelineConfig& cfg = run.config();
  const Plant plant(cfg);
  const Upstream up{run, plant};
  const StateSpaceSystem sys = plant.linearization(up.steady_state());

  EigenspaceOptions e;
  e.k_max = cfg.eigs.k_max;
  e.tol = cfg.eigs.tol;
  e.dt = cfg.eigs.dt;
  e.seed = cfg.seed;
  const UnstablePair pair = extract_unstable_pair(sys, e);

  write_matrix(run.output("phi_u.txt"), pair.pair.phi);
  write_matrix(run.output("psi_u.txt"), pair.pair.psi);
  CsvTable ritz({"side", "index", "real", "imag"});
  for (const auto& [side, res] :
       {std::pair{"right", &pair.right}, std::pair{"left", &pair.left}}) {
    for (Eigen::Index i = 0; i < res->ritz_values.size(); ++i) {
      ritz.add_row(Row{side, num(static_cast<int>(i)),
                       num(res->ritz_values(i).real()),
                       num(res->ritz_values(i).imag())});
    }
  }
  run.write_table("ritz.csv", ritz);

  Summary s;
  s.add("n_unstable", pair.pair.size());
  s.add("right_cycles", pair.right.cycles);
  s.add("left_cycles", pair.left.cycles);
  s.add("right_residual", pair.right.residual);
  s.add("left_residual", pair.left.residual);
  s.add("biorthogonality_error", pair.pair.biorthogonality_error());
  if (dense_ok(sys.states())) {
    const ComplexVector ev = eigenvalues(sys.A.matrix());
    run.write_table("dense.csv", eigenvalue_table(ev, kLeading));
    int dense_unstable = 0;
    for (const auto& l : ev) dense_unstable += l.real() > 0.0 ? 1 : 0;
    s.add("dense_unstable", dense_unstable);
  }
  finish(run, s);
  std::cout << "eigs: " << pair.pair.size() << " unstable eigenvalues";
  for (const auto& l : pair.right.ritz_values) {
    std::cout << " (" << num(l.real()) << (l.imag() < 0 ? " - " : " + ")
              << num(std::abs(l.imag())) << "i)";
  }
  std::cout << "\n";
  return 0;
}

int stage_snapshots(const RunOptions& o) {
  StageRun run(o, "snapshots", {"steady", "eigs"});
  const PipelineConfig& cfg = run.config();
  const Plant plant(cfg);
  const Upstream up{run, plant};
  const StateSpaceSystem sys = plant.linearization(up.steady_state());
  const StableProjector proj = stable_projector(up.pair(sys));

  SnapshotOptions so;
  so.dt = cfg.snapshots.dt;
  so.n_snapshots = cfg.snapshots.n_snapshots;
  so.spacing = cfg.snapshots.spacing;
  so.quadrature = parse_quadrature(cfg.snapshots.quadrature);
  const SnapshotMatrix x = impulse_response(sys, &proj, so);

  std::optional<PODBasis> theta;
  if (cfg.snapshots.m > 0) {
    theta = pod(output_snapshots(sys, x), cfg.snapshots.m);
    save_pod(*theta, run.output("theta"), run.run_hash());
  }
  const Matrix z0 = adjoint_initial_states(sys, theta ? &*theta : nullptr);
  const SnapshotMatrix z = adjoint_response(sys, &proj, z0, so);

  save_snapshots(x, run.output("x"), run.run_hash());
  save_snapshots(z, run.output("z"), run.run_hash());

  Summary s;
  s.add("direct_columns", static_cast<int>(x.columns.cols()));
  s.add("adjoint_columns", static_cast<int>(z.columns.cols()));
  s.add("horizon", so.dt * so.n_steps());
  s.add("output_modes", theta ? theta->size() : 0);
  if (theta) s.add("output_energy_captured", theta->fractions(theta->size() - 1));
  s.add("direct_hash", hex_digest(x.hash()));
  s.add("adjoint_hash", hex_digest(z.hash()));
  finish(run, s);
  std::cout << "snapshots: " << x.columns.cols() << " direct and "
            << z.columns.cols() << " adjoint columns over t = "
            << num(so.dt * so.n_steps()) << "\n";
  return 0;
}

int stage_rom(const RunOptions& o) {
  StageRun run(o, "rom", {"steady", "eigs", "snapshots"});
  const PipelineConfig& cfg = run.config();
  const Plant plant(cfg);
  const Upstream up{run, plant};
  const StateSpaceSystem sys = plant.linearization(up.steady_state());
  const BiorthogonalPair pair = up.pair(sys);
  const std::optional<PODBasis> theta = up.theta(sys);
  const SnapshotMatrix x = up.snapshots("x", sys);
  const SnapshotMatrix z = up.snapshots("z", sys);

  const BalanceResult bal = balance(x, z, cfg.rom.r);
  std::vector<std::string> warnings;
  const ReducedModel model = assemble_rom(sys, pair, bal,
                                          theta ? &*theta : nullptr, {},
                                          &warnings);
  save_model(model, run.output("model"));

  const GramianDiagonals g = empirical_gramians(model);
  CsvTable hsv({"index", "hsv", "controllability", "observability"});
  for (Eigen::Index i = 0; i < model.hsv.size(); ++i) {
    const bool kept = i < g.controllability.size();
    hsv.add_row(Row{num(static_cast<int>(i + 1)), num(model.hsv(i)),
                    kept ? num(g.controllability(i)) : "",
                    kept ? num(g.observability(i)) : ""});
  }
  run.write_table("hsv.csv", hsv);

  const ImpulseComparison cmp = rom_impulse_compare(model, x);
  CsvTable impulse({"channel", "l2_error", "relative_error", "peak_error"});
  for (Eigen::Index i = 0; i < cmp.l2_error.size(); ++i) {
    impulse.add_row(std::vector<double>{static_cast<double>(i), cmp.l2_error(i),
                                        cmp.relative_error(i),
                                        cmp.peak_error(i)});
  }
  run.write_table("impulse.csv", impulse);

  Summary s;
  s.add("n_u", model.n_u());
  s.add("r", model.r());
  s.add("order", model.order());
  s.add("cross_su", model.cross_su);
  s.add("cross_us", model.cross_us);
  s.add("leading_output_error",
        cmp.relative_error.size() ? cmp.relative_error(0) : 0.0);
  s.add("model_hash", hex_digest(model_hash(model)));
  s.add("warnings", static_cast<int>(warnings.size()));
  finish(run, s);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "rom: order " << model.order() << " (" << model.n_u()
            << " unstable + " << model.r() << " stable), leading HSV "
            << num(model.hsv.size() ? model.hsv(0) : 0.0)
            << ", leading-output impulse error "
            << num(cmp.relative_error.size() ? cmp.relative_error(0) : 0.0)
            << "\n";
  return 0;
}

int stage_oracle(const RunOptions& o) {
  StageRun run(o, "oracle-compare", {"steady", "eigs", "snapshots"});
  const PipelineConfig& cfg = run.config();
  const Plant plant(cfg);
  if (!dense_ok(plant.states())) {
    throw ValidationError("oracle-compare needs a dense realization; the plant "
                          "has " + std::to_string(plant.states()) +
                          " states (cap " + std::to_string(kDenseSizeCap) + ")");
  }
  const Upstream up{run, plant};
  const StateSpaceSystem sys = plant.linearization(up.steady_state());
  const std::optional<PODBasis> theta = up.theta(sys);
  // Every numerically positive HSV of the snapshot data, not just the
  // truncated model's.
  const BalanceResult bal =
      balance(up.snapshots("x", sys), up.snapshots("z", sys), -1);
  const int n_u = up.pair(sys).size();

  const DenseRealization dr = euclidean_realization(sys, theta ? &*theta : nullptr);
  const UnstableBalancedTruncation ex = exact_bt_unstable(dr.A, dr.B, dr.C);

  CsvTable hsv({"index", "pipeline", "exact", "relative_error"});
  const double cutoff = ex.hsv_s.size() ? cfg.oracle.hsv_floor * ex.hsv_s(0) : 0.0;
  double worst = 0.0;
  int compared = 0;
  for (Eigen::Index i = 0; i < ex.hsv_s.size() && ex.hsv_s(i) > cutoff; ++i) {
    const bool have = i < bal.hsv.size();
    const double err = have ? std::abs(bal.hsv(i) - ex.hsv_s(i)) / ex.hsv_s(i)
                            : std::numeric_limits<double>::infinity();
    worst = std::max(worst, err);
    ++compared;
    hsv.add_row(Row{num(static_cast<int>(i + 1)), have ? num(bal.hsv(i)) : "",
                    num(ex.hsv_s(i)), num(err)});
  }
  run.write_table("hsv_compare.csv", hsv);

  const EquivalenceReport eq = projected_gramian_check(dr.A, dr.B, dr.C, 0.0, cfg.seed);
  CsvTable equiv({"n_u", "controllability", "observability"});
  equiv.add_row(std::vector<double>{static_cast<double>(eq.n_u),
                                    eq.controllability, eq.observability});
  run.write_table("projected_gramians.csv", equiv);

  const bool unstable_match = n_u == ex.r_u;
  const bool pass = unstable_match && compared > 0 && worst <= cfg.oracle.tol;
  Summary s;
  s.add("n_u_pipeline", n_u);
  s.add("n_u_exact", ex.r_u);
  s.add("compared", compared);
  s.add("worst_relative_error", worst);
  s.add("tolerance", cfg.oracle.tol);
  s.add("projected_gramian_discrepancy", eq.worst());
  s.add("pass", pass);
  finish(run, s);
  std::cout << "oracle-compare: " << compared << " stable HSVs, worst relative "
            << "error " << num(worst) << " (tol " << num(cfg.oracle.tol)
            << "), unstable dimension " << n_u << "/" << ex.r_u
            << ": " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 3;
}

int stage_lqr(const RunOptions& o) {
  StageRun run(o, "lqr", {"steady", "eigs", "snapshots", "rom"});
  const PipelineConfig& cfg = run.config();
  const Plant plant(cfg);
  const Upstream up{run, plant};
  const StateSpaceSystem sys = plant.linearization(up.steady_state());
  const ReducedModel model = up.model();

  const LqrResult lqr = cfg.control.unstable_only
                            ? lqr_gain_unstable_only(model, cfg.control.c)
                            : lqr_gain(model, cfg.control.c);
  const Compensator comp = make_compensator(model, lqr.K);
  write_matrix(run.output("K.txt"), lqr.K);
  run.write_table("poles.csv", eigenvalue_table(lqr.closed_loop));

  Summary s;
  s.add("c", cfg.control.c);
  s.add("unstable_only", cfg.control.unstable_only);
  s.add("care_residual", lqr.care_residual);
  s.add("model_abscissa", lqr.abscissa);
  std::string detail;
  if (dense_ok(sys.states())) {
    const double a = spectral_abscissa(
        closed_loop_matrix(sys, comp, FeedbackMode::kFullState));
    s.add("plant_abscissa", a);
    detail = ", linear plant abscissa " + num(a);
  }
  finish(run, s);
  std::cout << "lqr: model closed-loop abscissa " << num(lqr.abscissa) << detail
            << "\n";
  return 0;
}

// Trajectory samples for noise statistics: the uncontrolled approach to the
// limit cycle, or for linear plants an impulse response cut off before it
// grows by more than three orders of magnitude.
Matrix noise_trajectory(const PipelineConfig& cfg, const Plant& plant,
                        const StateSpaceSystem& sys, const Vector& x_ss) {
  const double dt = cfg.steady.dt;
  if (plant.is_hopf()) {
    const LimitCycle lc = approach_limit_cycle(
        plant.pde(), x_ss, dt, cfg.control.noise_transient,
        cfg.control.noise_window, 10, cfg.control.noise_perturbation);
    return lc.samples.colwise() - x_ss;
  }
  const Propagator prop(sys.A, dt);
  Vector x = plant.actuator_state();
  const double e0 = plant.energy(x);
  std::vector<Vector> cols;
  const int steps = static_cast<int>(std::lround(
      (cfg.control.noise_transient + cfg.control.noise_window) / dt));
  const int first = static_cast<int>(std::lround(cfg.control.noise_transient / dt));
  for (int k = 0; k <= steps; ++k) {
    if (k >= first && k % 10 == 0) cols.push_back(x);
    if (plant.energy(x) > 1e3 * e0) break;
    x = prop.step(x);
  }
  Matrix out(x.size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = cols[j];
  }
  return out;
}

int stage_lqg(const RunOptions& o) {
  StageRun run(o, "lqg", {"steady", "eigs", "snapshots", "rom", "lqr"});
  const PipelineConfig& cfg = run.config();
  const Plant plant(cfg);
  const Upstream up{run, plant};
  const Vector x_ss = up.steady_state();
  const StateSpaceSystem sys = plant.linearization(x_ss);
  const ReducedModel model = up.model();
  const Matrix k = read_matrix(run.input("lqr", "K.txt"));

  const SensorMap sm = sensor_map(model, configured_sensors(cfg, plant));
  const Matrix dev = noise_trajectory(cfg, plant, sys, x_ss);
  const Matrix full_out = sys.C * dev;
  Matrix ys(static_cast<Eigen::Index>(sm.rows.size()), dev.cols());
  for (std::size_t i = 0; i < sm.rows.size(); ++i) {
    ys.row(static_cast<Eigen::Index>(i)) = full_out.row(sm.rows[i]);
  }
  const NoiseModel noise = estimate_noise(
      model, sm.cbar, dev, galerkin_rhs(model, plant.dynamics(), x_ss), ys);
  const KalmanResult kf = kalman_gain(model.a(), sm.cbar, noise.q_w, noise.r_v);
  const Compensator comp = make_compensator(model, k, kf.L, sm);

  write_matrix(run.output("L.txt"), kf.L);
  write_matrix(run.output("q_w.txt"), noise.q_w);
  write_matrix(run.output("r_v.txt"), noise.r_v);
  run.write_table("observer_poles.csv", eigenvalue_table(kf.observer_poles));
  CsvTable sensors({"sensor", "output_row"});
  for (std::size_t i = 0; i < sm.rows.size(); ++i) {
    sensors.add_row(std::vector<double>{static_cast<double>(i),
                                        static_cast<double>(sm.rows[i])});
  }
  run.write_table("sensors.csv", sensors);

  Summary s;
  s.add("sensors", static_cast<int>(sm.rows.size()));
  s.add("min_pbh_margin",
        sm.pbh_margins.empty()
            ? std::numeric_limits<double>::infinity()
            : *std::min_element(sm.pbh_margins.begin(), sm.pbh_margins.end()));
  s.add("noise_samples", noise.samples);
  s.add("shrinkage", noise.shrinkage);
  s.add("regularized", noise.regularized);
  s.add("care_residual", kf.care_residual);
  s.add("observer_abscissa", kf.abscissa);
  std::string detail;
  if (dense_ok(sys.states())) {
    StateSpaceSystem lin = sys;
    lin.nonlinear.reset();
    const double a = spectral_abscissa(
        closed_loop_matrix(lin, comp, FeedbackMode::kObserver));
    s.add("coupled_abscissa", a);
    detail = ", coupled linear abscissa " + num(a);
  }
  finish(run, s);
  for (const auto& w : noise.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "lqg: " << sm.rows.size() << " sensors, observer abscissa "
            << num(kf.abscissa) << detail << "\n";
  return 0;
}

std::string time_label(double t) {
  std::string s = format_number(t);
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

int stage_simulate(const RunOptions& o) {
  const FeedbackMode mode = parse_feedback_mode(o.config.simulate.mode);
  std::vector<std::string> upstream{"steady", "eigs", "snapshots", "rom", "lqr"};
  if (mode == FeedbackMode::kObserver) upstream.push_back("lqg");
  StageRun run(o, "simulate", upstream);
  const PipelineConfig& cfg = run.config();
  const SimulateConfig& sc = cfg.simulate;
  const Plant plant(cfg);
  const Upstream up{run, plant};
  const Vector x_ss = up.steady_state();
  StateSpaceSystem sys = plant.linearization(x_ss);
  const ReducedModel model = up.model();
  const Matrix k = read_matrix(run.input("lqr", "K.txt"));

  Compensator comp;
  if (mode == FeedbackMode::kObserver) {
    const Matrix l = read_matrix(run.input("lqg", "L.txt"));
    comp = make_compensator(model, k, l,
                            sensor_map(model, configured_sensors(cfg, plant)));
  } else {
    comp = make_compensator(model, k);
  }

  // Nonlinear runs start on the limit cycle; linear ones from the actuator
  // footprint, as deviations about the origin.
  Vector x0;
  Vector reference;
  double amplitude = 0.0;
  const bool nonlinear = plant.is_hopf() && sc.plant == "nonlinear";
  if (nonlinear) {
    const LimitCycle lc = approach_limit_cycle(plant.pde(), x_ss, sc.dt,
                                               sc.transient, kCycleWindow);
    x0 = lc.state;
    reference = x_ss;
    amplitude = lc.amplitude;
  } else {
    sys.nonlinear.reset();
    x0 = plant.actuator_state();
    reference = Vector::Zero(plant.states());
    amplitude = plant.energy(x0);
  }

  const int count = static_cast<int>(sc.turn_on.size());
  std::vector<Trace> traces(static_cast<std::size_t>(count));
  parallel_for(count, run.jobs(), [&](int i) {
    SimulationOptions so;
    so.dt = sc.dt;
    so.turn_on = sc.turn_on[static_cast<std::size_t>(i)];
    so.horizon = so.turn_on + sc.horizon;
    so.record_every = sc.record_every;
    traces[static_cast<std::size_t>(i)] =
        closed_loop_simulate(sys, comp, mode, x0, reference, so);
  });

  CsvTable table({"turn_on", "final_energy", "final_relative",
                  "peak_after_turn_on", "blew_up"});
  for (int i = 0; i < count; ++i) {
    const Trace& t = traces[static_cast<std::size_t>(i)];
    const double on = sc.turn_on[static_cast<std::size_t>(i)];
    run.write_table("trace_on_" + time_label(on) + ".csv", t.table());
    const double final = t.energy.empty() ? 0.0 : t.energy.back();
    table.add_row(Row{num(on), num(final), num(final / amplitude),
                      num(t.max_energy_after(on)), flag(t.blew_up)});
    std::cout << "simulate: " << to_string(mode) << " on "
              << (nonlinear ? "nonlinear" : "linear") << " plant, turn-on "
              << num(on) << ": final energy " << num(final / amplitude)
              << " of the reference amplitude"
              << (t.blew_up ? " (diverged: " + t.message + ")" : "") << "\n";
  }
  run.write_table("runs.csv", table);

  Summary s;
  s.add("mode", to_string(mode));
  s.add("plant", std::string(nonlinear ? "nonlinear" : "linear"));
  s.add("reference_amplitude", amplitude);
  s.add("runs", count);
  finish(run, s);
  return 0;
}

int stage_bifurcation(const RunOptions& o) {
  StageRun run(o, "bifurcation", {});
  const PipelineConfig& cfg = run.config();
  const BifurcationConfig& b = cfg.bifurcation;
  if (cfg.testbed.kind != "hopf-pde") {
    throw ValidationError("bifurcation needs the hopf-pde testbed");
  }
  const HopfScan scan = hopf_scan(cfg.testbed.hopf, b.mu_min, b.mu_max, b.step,
                                  cfg.steady.dt, cfg.steady.steps);
  const auto& points = scan.branch.points;
  const int count = static_cast<int>(points.size());

  std::vector<double> amplitude(points.size(), 0.0);
  const bool cycles = b.cycle_transient > 0.0;
  if (cycles) {
    parallel_for(count, run.jobs(), [&](int i) {
      const BranchPoint& p = points[static_cast<std::size_t>(i)];
      HopfSpec spec = cfg.testbed.hopf;
      spec.mu = p.parameter;
      const HopfPde pde(spec);
      amplitude[static_cast<std::size_t>(i)] =
          approach_limit_cycle(pde, p.state, cfg.steady.dt, b.cycle_transient,
                               b.cycle_window)
              .amplitude;
    });
  }

  std::vector<std::string> header{"mu", "converged", "residual",
                                  "newton_iterations", "leading_real",
                                  "leading_imag", "steady_energy"};
  if (cycles) header.push_back("cycle_amplitude");
  CsvTable branch(header);
  HopfPde base(cfg.testbed.hopf);
  for (int i = 0; i < count; ++i) {
    const BranchPoint& p = points[static_cast<std::size_t>(i)];
    const std::complex<double> lead =
        p.leading.size() ? p.leading(0) : std::complex<double>(0.0, 0.0);
    Row row{num(p.parameter), flag(p.converged), num(p.residual),
            num(p.newton_iterations), num(lead.real()), num(std::abs(lead.imag())),
            num(base.energy(p.state))};
    if (cycles) row.push_back(num(amplitude[static_cast<std::size_t>(i)]));
    branch.add_row(row);
    char name[32];
    std::snprintf(name, sizeof(name), "states/state_%03d.txt", i);
    fs::create_directories(run.output("states"));
    write_matrix(run.output(name), Matrix(p.state));
  }
  run.write_table("branch.csv", branch);

  CsvTable bracket({"mu_lower", "mu_upper", "lower_real", "upper_real",
                    "confirmed"});
  bracket.add_row(Row{num(scan.branch.bracket->first),
                      num(scan.branch.bracket->second), num(scan.lower_real),
                      num(scan.upper_real), flag(scan.confirmed)});
  run.write_table("bracket.csv", bracket);

  Summary s;
  s.add("points", count);
  s.add("complete", scan.branch.complete);
  s.add("mu_lower", scan.branch.bracket->first);
  s.add("mu_upper", scan.branch.bracket->second);
  s.add("confirmed", scan.confirmed);
  finish(run, s);
  std::cout << "bifurcation: critical parameter in [" << num(scan.branch.bracket->first)
            << ", " << num(scan.branch.bracket->second) << "]"
            << (scan.confirmed ? ", confirmed by dense eigenvalues" : ", NOT confirmed")
            << "\n";
  return 0;
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{
      "steady", "eigs", "snapshots", "rom",     "oracle-compare",
      "lqr",    "lqg",  "simulate",  "bifurcation"};
  return names;
}

int run_stage(const std::string& stage, const RunOptions& options) {
  static const std::map<std::string, int (*)(const RunOptions&)> table{
      {"steady", stage_steady},
      {"eigs", stage_eigs},
      {"snapshots", stage_snapshots},
      {"rom", stage_rom},
      {"oracle-compare", stage_oracle},
      {"lqr", stage_lqr},
      {"lqg", stage_lqg},
      {"simulate", stage_simulate},
      {"bifurcation", stage_bifurcation},
  };
  const auto it = table.find(stage);
  if (it == table.end()) throw ValidationError("unknown stage '" + stage + "'");
  return it->second(options);
}

}  // namespace ubpod::cli
