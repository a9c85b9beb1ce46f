// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ubpod/balpod.hpp"
#include "ubpod/control.hpp"
#include "ubpod/krylov.hpp"
#include "ubpod/linops.hpp"
#include "ubpod/oracle.hpp"
#include "ubpod/snapshots.hpp"
#include "ubpod/spectral.hpp"
#include "ubpod/steady.hpp"
#include "ubpod/testbed.hpp"

namespace {

using namespace ubpod;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shared hopf pipeline, built once on first use.
struct HopfFixture {
  HopfPde pde{HopfSpec{}};
  NewtonReport newton;
  StateSpaceSystem sys;
  UnstablePair unstable;
  StableProjector projector;
  SnapshotOptions snap;
  SnapshotMatrix x;
  std::map<int, PODBasis> theta;
  std::map<int, SnapshotMatrix> z;
  LimitCycle cycle;
  bool have_cycle = false;

  HopfFixture() {
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

  const SnapshotMatrix& adjoint(int m) {
    if (!z.count(m)) {
      theta[m] = pod(output_snapshots(sys, x), m);
      const Matrix z0 = adjoint_initial_states(sys, &theta[m]);
      z[m] = adjoint_response(sys, &projector, z0, snap);
    }
    return z[m];
  }

  ReducedModel model(int m, int r, std::vector<std::string>* warnings = nullptr,
                     const BiorthogonalPair* pair = nullptr) {
    const SnapshotMatrix& zm = adjoint(m);
    const BalanceResult bal = balance(x, zm, r);
    return assemble_rom(sys, pair ? *pair : unstable.pair, bal, &theta[m], {},
                        warnings);
  }

  const LimitCycle& limit_cycle() {
    if (!have_cycle) {
      cycle = approach_limit_cycle(pde, newton.x, 0.01, 300.0, 50.0);
      have_cycle = true;
    }
    return cycle;
  }
};

std::unique_ptr<HopfFixture> g_hopf;

HopfFixture& hopf() {
  if (!g_hopf) g_hopf = std::make_unique<HopfFixture>();
  return *g_hopf;
}

double min_stable_decay(const ComplexVector& eig) {
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& l : eig) {
    if (l.real() < 0.0) slowest = std::min(slowest, -l.real());
  }
  return slowest;
}

// ---------------------------------------------------------------------------

Outcome criterion_oracle_equivalence() {
  struct Case {
    int n, n_u;
    std::uint64_t seed;
  };
  const Case cases[] = {{8, 1, 11}, {20, 2, 12}, {40, 3, 13}};
  Outcome out{true, ""};
  std::ostringstream detail;
  for (const Case& c : cases) {
    const auto t0 = Clock::now();
    RandomLtiSpec spec;
    spec.n = c.n;
    spec.n_u = c.n_u;
    spec.inputs = 2;
    spec.outputs = 2;
    spec.seed = c.seed;
    const RandomLti lti = random_lti(spec);

    EigenspaceOptions eopt;
    eopt.k_max = 4;
    eopt.tol = 1e-11;
    const UnstablePair up = extract_unstable_pair(lti.sys, eopt);
    const StableProjector proj = stable_projector(up.pair);

    SnapshotOptions so;
    so.dt = 1e-3;
    so.spacing = 1;
    so.quadrature = Quadrature::kMidpoint;
    const double horizon = 12.0 / min_stable_decay(lti.eigenvalues);
    so.n_snapshots = static_cast<int>(std::ceil(horizon / so.dt));
    const SnapshotMatrix xs = impulse_response(lti.sys, &proj, so);
    const Matrix z0 = adjoint_initial_states(lti.sys, nullptr);
    const SnapshotMatrix zs = adjoint_response(lti.sys, &proj, z0, so);
    const BalanceResult bal = balance(xs, zs, -1);

    const Matrix a = lti.sys.A.matrix();
    const UnstableBalancedTruncation ex =
        exact_bt_unstable(a, lti.sys.B, lti.sys.C);
    const double cutoff = 1e-6 * ex.hsv_s(0);
    double worst = 0.0;
    int compared = 0;
    for (Eigen::Index i = 0; i < ex.hsv_s.size(); ++i) {
      if (ex.hsv_s(i) <= cutoff) break;
      if (i >= bal.hsv.size()) {
        worst = std::numeric_limits<double>::infinity();
        break;
      }
      worst = std::max(worst, std::abs(bal.hsv(i) - ex.hsv_s(i)) / ex.hsv_s(i));
      ++compared;
    }
    const double secs = seconds_since(t0);
    const bool ok = up.pair.size() == c.n_u && worst <= 0.02 && secs <= 120.0;
    out.pass = out.pass && ok;
    detail << " [n=" << c.n << " n_u=" << up.pair.size() << "/" << c.n_u
           << " hsv=" << compared << " worst=" << sci(worst)
           << " horizon=" << fmt("%.1f", horizon) << " t=" << fmt("%.1fs", secs)
           << "]";
  }
  out.detail = "stable HSVs vs exact unstable BT (2% tol)" + detail.str();
  return out;
}

Outcome criterion_parseval() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int unconverged = 0;
  for (int i = 0; i < 20; ++i) {
    RandomLtiSpec spec;
    spec.n = 2 + i % 9;
    spec.n_u = 0;
    spec.inputs = 1 + i % 3;
    spec.outputs = 1 + (i + 1) % 3;
    spec.seed = 100 + i;
    const RandomLti lti = random_lti(spec);
    const Matrix a = lti.sys.A.matrix();
    const Matrix& b = lti.sys.B;
    const Matrix& c = lti.sys.C;
    const FrequencyGramians fg = freq_domain_gramians(a, b, c);
    if (!fg.converged) ++unconverged;
    const Matrix wc = solve_lyapunov(a, b * b.transpose());
    const Matrix wo = solve_lyapunov(a.transpose(), c.transpose() * c);
    worst = std::max(worst, (fg.wc - wc).norm() / wc.norm());
    worst = std::max(worst, (fg.wo - wo).norm() / wo.norm());
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && unconverged == 0 && secs <= 30.0,
          "20 stable systems, worst rel Frobenius " + sci(worst) +
              " (tol 1e-6), t=" + fmt("%.1fs", secs)};
}

Outcome criterion_projected_identity() {
  double worst = 0.0;
  std::ostringstream d;
  for (int i = 0; i < 10; ++i) {
    RandomLtiSpec spec;
    spec.n = 4 + (16 * i) / 9;
    spec.n_u = 1 + i % 3;
    spec.inputs = 1 + i % 2;
    spec.outputs = 1 + (i + 1) % 2;
    spec.seed = 200 + i;
    const RandomLti lti = random_lti(spec);
    const EquivalenceReport rep =
        projected_gramian_check(lti.sys.A.matrix(), lti.sys.B, lti.sys.C);
    worst = std::max(worst, rep.worst());
  }
  return {worst <= 1e-8,
          "10 hyperbolic systems (n 4..20), worst discrepancy " + sci(worst) +
              " (tol 1e-8)"};
}

Outcome criterion_block_diagonal() {
  HopfFixture& h = hopf();
  std::vector<std::string> warn_clean;
  const ReducedModel clean = h.model(20, 20, &warn_clean);

  // Same pipeline on a random system with exact eigenspaces to hand.
  RandomLtiSpec spec;
  spec.n = 20;
  spec.n_u = 2;
  spec.seed = 21;
  const RandomLti lti = random_lti(spec);
  EigenspaceOptions eopt;
  eopt.tol = 1e-11;
  const UnstablePair up = extract_unstable_pair(lti.sys, eopt);
  const StableProjector proj = stable_projector(up.pair);
  SnapshotOptions so;
  so.dt = 0.01;
  so.spacing = 1;
  so.n_snapshots = 3000;
  so.quadrature = Quadrature::kMidpoint;
  const SnapshotMatrix xs = impulse_response(lti.sys, &proj, so);
  const SnapshotMatrix zs = adjoint_response(
      lti.sys, &proj, adjoint_initial_states(lti.sys, nullptr), so);
  const ReducedModel rnd =
      assemble_rom(lti.sys, up.pair, balance(xs, zs, 10), nullptr);

  // Perturb the left unstable basis by 1e-3 relative and rebuild.
  Matrix noise = Matrix::Zero(h.sys.states(), h.unstable.pair.size());
  {
    std::uint64_t s = 77;
    for (Eigen::Index j = 0; j < noise.size(); ++j) {
      s = s * 6364136223846793005ULL + 1442695040888963407ULL;
      noise.data()[j] = static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5;
    }
  }
  const Matrix psi = h.unstable.pair.psi;
  const Matrix psi_bad = psi + 1e-3 * psi.norm() / noise.norm() * noise;
  const BiorthogonalPair bad =
      biorthonormalize(h.unstable.pair.phi, psi_bad, h.sys.W);
  std::vector<std::string> warn_bad;
  const ReducedModel pert = h.model(20, 20, &warn_bad, &bad);

  const bool ok = clean.cross_coupling() <= 1e-6 && rnd.cross_coupling() <= 1e-6 &&
                  std::isfinite(pert.cross_coupling()) &&
                  pert.cross_coupling() > 1e-6 && !warn_bad.empty();
  return {ok, "hopf " + sci(clean.cross_coupling()) + ", random " +
                  sci(rnd.cross_coupling()) + " (tol 1e-6); perturbed 1e-3 -> " +
                  sci(pert.cross_coupling()) + " with " +
                  std::to_string(warn_bad.size()) + " warning(s)"};
}

Outcome criterion_hsv_convergence() {
  HopfFixture& h = hopf();
  const ReducedModel m4 = h.model(4, 20);
  const ReducedModel m20 = h.model(20, 20);
  double hsv_worst = 0.0;
  for (int i = 0; i < 4; ++i) {
    hsv_worst =
        std::max(hsv_worst, std::abs(m4.hsv(i) - m20.hsv(i)) / m20.hsv(i));
  }
  const GramianDiagonals g = empirical_gramians(m20);
  double gram_worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double s = m20.hsv(i);
    gram_worst = std::max({gram_worst,
                           std::abs(g.controllability(i) - s) / s,
                           std::abs(g.observability(i) - s) / s});
  }
  std::ostringstream d;
  d << "leading 4 HSVs m=4 vs m=20 worst " << sci(hsv_worst)
    << "; r=20 Gramian diagonals vs HSVs (leading 10) worst " << sci(gram_worst)
    << " (tol 5%); sigma1=" << sci(m20.hsv(0)) << " n_u=" << m20.n_u();
  return {hsv_worst <= 0.05 && gram_worst <= 0.05, d.str()};
}

Outcome criterion_rom_fidelity() {
  HopfFixture& h = hopf();
  std::vector<double> errs;
  std::ostringstream d;
  for (int r : {4, 10, 20}) {
    const ReducedModel m = h.model(20, r);
    const ImpulseComparison cmp = rom_impulse_compare(m, h.x);
    errs.push_back(cmp.relative_error(0));
    d << " r=" << r << ":" << sci(cmp.relative_error(0));
  }
  const bool mono = errs[0] > errs[1] && errs[1] > errs[2];
  return {mono && errs[2] <= 0.05,
          "leading-channel relative L2 error" + d.str() +
              (mono ? " (monotone)" : " (NOT monotone)") + ", tol 5% at r=20"};
}

Outcome criterion_steady_states() {
  HopfFixture& h = hopf();
  const NewtonReport& nr = h.newton;
  // March from the steady state without control. The converged state is a
  // fixed point of the discrete stepper to the last bit, so the run is seeded
  // with a 1e-8 perturbation standing in for round-off in a large solver.
  NonlinearStepper stepper(h.pde.dynamics(), 0.01);
  Vector x = nr.x + h.pde.random_state(1e-8);
  const double e0 = h.pde.energy(x - nr.x);
  double emax = e0;
  for (int k = 0; k < 10000; ++k) {
    stepper.step(x);
    emax = std::max(emax, h.pde.energy(x - nr.x));
  }
  const double growth = emax / e0;
  const double step = 0.1;
  const HopfScan scan = hopf_scan(h.pde.spec(), 0.8, 2.0, step);
  const double width = scan.branch.bracket
                           ? scan.branch.bracket->second - scan.branch.bracket->first
                           : std::numeric_limits<double>::infinity();
  std::ostringstream d;
  d << "newton residual " << sci(nr.residual()) << " in " << nr.iterations
    << " its; growth " << sci(growth) << " over 100 tu; bracket ";
  if (scan.branch.bracket) {
    d << "[" << scan.branch.bracket->first << ", " << scan.branch.bracket->second
      << "] Re " << sci(scan.lower_real) << " -> " << sci(scan.upper_real);
  } else {
    d << "none";
  }
  const bool ok = nr.converged && nr.residual() <= 1e-10 && nr.iterations <= 50 &&
                  growth >= 10.0 && width <= step + 1e-12 && scan.confirmed;
  return {ok, d.str()};
}

Outcome criterion_full_state() {
  HopfFixture& h = hopf();
  const ReducedModel m = h.model(4, 10);
  const LqrResult lqr = lqr_gain(m, 1e5);
  const Compensator comp = make_compensator(m, lqr.K);
  const double linear_abscissa = spectral_abscissa(
      closed_loop_matrix(h.sys, comp, FeedbackMode::kFullState));

  const LimitCycle& lc = h.limit_cycle();
  std::ostringstream d;
  d << "order " << m.order() << ", linear closed-loop abscissa "
    << sci(linear_abscissa) << "; amplitude " << fmt("%.3f", lc.amplitude)
    << ";";
  bool ok = linear_abscissa < 0.0;
  for (double t_on : {0.0, 2.0, 4.0}) {
    SimulationOptions so;
    so.turn_on = t_on;
    so.horizon = t_on + 200.0;
    const Trace tr = closed_loop_simulate(h.sys, comp, FeedbackMode::kFullState,
                                          lc.state, h.newton.x, so);
    const double final = tr.energy.back() / lc.amplitude;
    ok = ok && !tr.blew_up && final < 1e-4;
    d << " on@" << t_on << ":" << sci(final);
  }
  d << " (tol 1e-4)";
  return {ok, d.str()};
}

Outcome criterion_observer() {
  HopfFixture& h = hopf();
  const ReducedModel m = h.model(20, 20);
  const LqrResult lqr = lqr_gain(m, 1e5);
  const SensorMap sm = sensor_map(m, h.pde.sensor_rows());

  // Noise statistics from the uncontrolled transient onto the limit cycle.
  const LimitCycle tr = approach_limit_cycle(h.pde, h.newton.x, 0.01, 0.0,
                                             150.0, 10, 1e-3);
  const Matrix dev = tr.samples.colwise() - h.newton.x;
  Matrix ys(sm.rows.size(), dev.cols());
  for (std::size_t i = 0; i < sm.rows.size(); ++i) {
    ys.row(i) = dev.row(sm.rows[i]);
  }
  const NoiseModel noise = estimate_noise(
      m, sm.cbar, dev, galerkin_rhs(m, h.pde.dynamics(), h.newton.x), ys);
  const KalmanResult kf = kalman_gain(m.a(), sm.cbar, noise.q_w, noise.r_v);
  const Compensator comp = make_compensator(m, lqr.K, kf.L, sm);

  const LimitCycle& lc = h.limit_cycle();
  const double radius = 0.05 * lc.amplitude;
  std::ostringstream d;
  d << "order " << m.order() << ", regulator abscissa " << sci(lqr.abscissa)
    << ", observer abscissa " << sci(kf.abscissa) << ";";
  bool ok = true;
  for (double t_on : {0.0, 3.0}) {
    SimulationOptions so;
    so.turn_on = t_on;
    so.horizon = t_on + 700.0;
    const Trace t = closed_loop_simulate(h.sys, comp, FeedbackMode::kObserver,
                                         lc.state, h.newton.x, so);
    // Earliest time after which the energy never leaves the neighborhood.
    double entered = std::numeric_limits<double>::infinity();
    for (std::size_t k = t.energy.size(); k-- > 0;) {
      if (t.energy[k] > radius) break;
      entered = t.t[k];
    }
    const double held = t.blew_up ? 0.0 : so.horizon - entered;
    ok = ok && held >= 500.0;
    d << " on@" << t_on << ": inside from t=" << fmt("%.1f", entered)
      << " held " << fmt("%.1f", std::max(held, 0.0)) << " tu";
  }

  // Observer convergence on the linear plant.
  StateSpaceSystem lin = h.sys;
  lin.nonlinear.reset();
  SimulationOptions so;
  so.horizon = 150.0;
  so.record_every = 10;
  const Vector x0 = h.pde.actuator().col(0);
  const Trace t = closed_loop_simulate(lin, comp, FeedbackMode::kObserver, x0,
                                       Vector::Zero(h.sys.states()), so);
  double worst = 0.0;
  const double transient = 50.0;
  for (std::size_t k = 0; k < t.t.size(); ++k) {
    if (t.t[k] < transient) continue;
    const double an = t.a.col(k).norm();
    if (an < 1e-250) continue;
    worst = std::max(worst, (t.a.col(k) - t.a_hat.col(k)).norm() / an);
  }
  ok = ok && worst <= 1e-2 && !t.blew_up;
  d << "; linear |a - a_hat|/|a| after t=" << transient << ": " << sci(worst)
    << " (tol 1e-2); noise samples " << noise.samples
    << (noise.regularized ? " regularized" : "");
  return {ok, d.str()};
}

Outcome criterion_unstable_only() {
  HopfFixture& h = hopf();
  const ReducedModel m = h.model(4, 10);
  const LimitCycle& lc = h.limit_cycle();
  CsvTable table({"gain", "c", "reduced_abscissa", "linear_abscissa",
                  "final_energy_ratio", "max_energy_ratio_after_100"});
  bool any = false;
  std::ostringstream d;
  struct Row {
    std::string kind;
    double c;
  };
  const Row rows[] = {{"full", 1e5}, {"unstable-only", 1e3},
                      {"unstable-only", 1e5}, {"unstable-only", 1e7}};
  bool full_ok = false;
  for (const Row& row : rows) {
    const LqrResult g = row.kind == "full" ? lqr_gain(m, row.c)
                                           : lqr_gain_unstable_only(m, row.c);
    const Compensator comp = make_compensator(m, g.K);
    const double lin = spectral_abscissa(
        closed_loop_matrix(h.sys, comp, FeedbackMode::kFullState));
    SimulationOptions so;
    so.horizon = 400.0;
    const Trace t = closed_loop_simulate(h.sys, comp, FeedbackMode::kFullState,
                                         lc.state, h.newton.x, so);
    const double final = t.energy.back() / lc.amplitude;
    const double late = t.max_energy_after(100.0) / lc.amplitude;
    const bool stab = !t.blew_up && final < 1e-4;
    if (row.kind == "full") {
      full_ok = stab;
    } else {
      any = any || stab;
    }
    table.add_row({row.kind, format_number(row.c), format_number(g.abscissa),
                   format_number(lin), format_number(final),
                   format_number(late)});
  }
  std::cout << table.str("acceptance");
  return {any && full_ok,
          "unstable-only gain stabilizes from the limit cycle for at least one c;"
          " table above"};
}

Outcome criterion_kernels() {
  std::ostringstream d;
  bool ok = true;

  // GMRES terminates in at most n iterations without restart.
  {
    const int n = 40;
    RandomLtiSpec spec;
    spec.n = n;
    spec.n_u = 0;
    spec.seed = 5;
    const Matrix a = random_lti(spec).sys.A.matrix() - 3.0 * Matrix::Identity(n, n);
    const Vector b = Vector::Ones(n);
    GmresOptions go;
    go.tol = 1e-12;
    go.restart = n;
    go.max_iter = n;
    const GmresResult g = gmres([&](const Vector& v) { return Vector(a * v); },
                                b, go);
    const double rel = (a * g.x - b).norm() / b.norm();
    ok = ok && g.iterations <= n && rel <= 1e-10;
    d << "gmres " << g.iterations << "/" << n << " its rel " << sci(rel);
  }
  // Lyapunov and Riccati residuals.
  {
    RandomLtiSpec spec;
    spec.n = 30;
    spec.n_u = 0;
    spec.inputs = 2;
    spec.outputs = 2;
    spec.seed = 6;
    const RandomLti lti = random_lti(spec);
    const Matrix a = lti.sys.A.matrix();
    const Matrix q = lti.sys.B * lti.sys.B.transpose();
    const double lres = lyapunov_residual(a, q, solve_lyapunov(a, q));
    spec.n_u = 3;
    const RandomLti unst = random_lti(spec);
    const Matrix au = unst.sys.A.matrix();
    const Matrix qc = unst.sys.C.transpose() * unst.sys.C;
    const Matrix r = Matrix::Identity(2, 2);
    const double cres =
        care_residual(au, unst.sys.B, qc, r, solve_care(au, unst.sys.B, qc, r));
    ok = ok && lres <= 1e-8 && cres <= 1e-8;
    d << "; lyapunov " << sci(lres) << ", care " << sci(cres);
  }
  // Adjoint consistency in the weighted inner product.
  {
    HopfFixture& h = hopf();
    const double res = adjoint_residual(h.sys.A, h.sys.W, 5, 3);
    ok = ok && res <= 1e-10;
    d << "; adjoint " << sci(res);
  }
  return {ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", criterion_oracle_equivalence},
      {"parseval", criterion_parseval},
      {"projected gramian identity", criterion_projected_identity},
      {"block diagonality", criterion_block_diagonal},
      {"hsv convergence", criterion_hsv_convergence},
      {"rom fidelity", criterion_rom_fidelity},
      {"steady states", criterion_steady_states},
      {"full-state feedback", criterion_full_state},
      {"observer feedback", criterion_observer},
      {"unstable-only gain", criterion_unstable_only},
      {"numerical kernels", criterion_kernels},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  const auto t_all = Clock::now();
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "CRITERION " << id << " " << (o.pass ? "PASS" : "FAIL") << ": "
              << criteria[k].first << " - " << o.detail << " ["
              << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
  }
  const double total = seconds_since(t_all);
  std::cout << "acceptance: " << failures << " failure(s), "
            << fmt("%.1f", total) << " s total" << std::endl;
  return failures == 0 ? 0 : 1;
}
