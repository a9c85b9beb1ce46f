#include "ubpod/control.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace ubpod {

namespace {

double pbh_margin(const Matrix& a, const Matrix& other, bool columns) {
  const Eigen::Index n = a.rows();
  const ComplexVector ev = eigenvalues(a);
  const double scale =
      std::max(1.0, std::sqrt(a.squaredNorm() + other.squaredNorm()));
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& l : ev) {
    if (l.real() < 0.0) continue;
    ComplexMatrix m;
    const ComplexMatrix shifted =
        l * ComplexMatrix::Identity(n, n) - a.cast<std::complex<double>>();
    if (columns) {
      m.resize(n, n + other.cols());
      m << shifted, other.cast<std::complex<double>>();
    } else {
      m.resize(n + other.rows(), n);
      m << shifted, other.cast<std::complex<double>>();
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const auto& s = svd.singularValues();
    worst = std::min(worst, s(s.size() - 1) / scale);
  }
  return worst;
}

std::string describe_unstable(const Matrix& a) {
  std::string out;
  for (const auto& l : eigenvalues(a)) {
    if (l.real() < 0.0) continue;
    if (!out.empty()) out += ", ";
    out += format_number(l.real()) + (l.imag() >= 0 ? "+" : "") +
           format_number(l.imag()) + "i";
  }
  return out;
}

Matrix sensor_rows_of(const Matrix& c, const std::vector<int>& rows) {
  Matrix out(rows.size(), c.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= c.rows()) {
      throw ValidationError("sensor row " + std::to_string(rows[i]) +
                            " outside output dimension " +
                            std::to_string(c.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = c.row(rows[i]);
  }
  return out;
}

}  // namespace

double stabilizability_margin(const Matrix& a, const Matrix& b) {
  return pbh_margin(a, b, true);
}

double detectability_margin(const Matrix& a, const Matrix& c) {
  return pbh_margin(a, c, false);
}

LqrResult lqr_gain(const Matrix& a, const Matrix& b, const Matrix& q,
                   const Matrix& r) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols()) {
    throw ValidationError("lqr_gain: inconsistent dimensions");
  }
  if (stabilizability_margin(a, b) < 1e-10) {
    throw ValidationError("lqr_gain: (A, B) is not stabilizable; unreachable "
                          "unstable direction among eigenvalues " +
                          describe_unstable(a));
  }
  LqrResult out;
  out.P = solve_care(a, b, q, r);
  out.K = -r.llt().solve(b.transpose() * out.P);
  out.care_residual = care_residual(a, b, q, r, out.P);
  out.closed_loop = eigenvalues(a + b * out.K);
  out.abscissa = n > 0 ? out.closed_loop(0).real()
                       : -std::numeric_limits<double>::infinity();
  if (!(out.abscissa < 0.0)) {
    throw NumericalError("lqr_gain: closed loop is not stable (abscissa " +
                         format_number(out.abscissa) + ")");
  }
  return out;
}

Matrix energy_weight(const ReducedModel& model) {
  const Matrix c = model.c();
  return c.transpose() * model.output_weight.apply(c);
}

LqrResult lqr_gain(const ReducedModel& model, double c) {
  if (!(c > 0.0)) throw ValidationError("lqr_gain: control weight must be > 0");
  const int p = model.inputs();
  Matrix q = energy_weight(model);
  q = 0.5 * (q + q.transpose());
  return lqr_gain(model.a(), model.b(), q, c * Matrix::Identity(p, p));
}

LqrResult lqr_gain_unstable_only(const ReducedModel& model, double c) {
  if (!(c > 0.0)) throw ValidationError("lqr_gain: control weight must be > 0");
  const int p = model.inputs();
  const int nu = model.n_u();
  Matrix q = model.c_u.transpose() * model.output_weight.apply(model.c_u);
  q = 0.5 * (q + q.transpose());
  const LqrResult block =
      lqr_gain(model.a_u, model.b_u, q, c * Matrix::Identity(p, p));
  LqrResult out;
  out.K = Matrix::Zero(p, model.order());
  out.K.leftCols(nu) = block.K;
  out.P = block.P;
  out.care_residual = block.care_residual;
  out.closed_loop = eigenvalues(model.a() + model.b() * out.K);
  out.abscissa = out.closed_loop.size() > 0
                     ? out.closed_loop(0).real()
                     : -std::numeric_limits<double>::infinity();
  return out;
}

SensorMap sensor_map(const ReducedModel& model, const std::vector<int>& rows,
                     double pbh_tol) {
  SensorMap out;
  out.rows = rows;
  out.cbar = sensor_rows_of(model.c(), rows);
  const Matrix a = model.a();
  const Eigen::Index n = a.rows();
  const double scale =
      std::max(1.0, std::sqrt(a.squaredNorm() + out.cbar.squaredNorm()));
  for (const auto& l : eigenvalues(a)) {
    if (l.real() < 0.0) continue;
    ComplexMatrix m(n + out.cbar.rows(), n);
    m << l * ComplexMatrix::Identity(n, n) - a.cast<std::complex<double>>(),
        out.cbar.cast<std::complex<double>>();
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const double margin =
        svd.singularValues()(svd.singularValues().size() - 1) / scale;
    out.pbh_margins.push_back(margin);
    if (margin < pbh_tol) {
      throw ValidationError("sensor_map: unstable mode " +
                            format_number(l.real()) + "+" +
                            format_number(std::abs(l.imag())) +
                            "i is unobservable through the chosen sensors "
                            "(PBH margin " + format_number(margin) + ")");
    }
  }
  return out;
}

NoiseModel estimate_noise(const ReducedModel& model, const Matrix& cbar,
                          const Matrix& deviations,
                          const std::function<Vector(const Vector&)>& reduced_rhs,
                          const Matrix& sensor_data) {
  const int k = model.order();
  if (deviations.rows() != model.states() || cbar.cols() != k ||
      sensor_data.rows() != cbar.rows() ||
      sensor_data.cols() != deviations.cols()) {
    throw ValidationError("estimate_noise: inconsistent dimensions");
  }
  const Eigen::Index n_samples = deviations.cols();
  if (n_samples == 0) throw ValidationError("estimate_noise: empty trajectory");
  const Matrix a_meas = model.W.gram(model.psi(), deviations);
  const Matrix a = model.a();
  Matrix w(k, n_samples);
  for (Eigen::Index j = 0; j < n_samples; ++j) {
    w.col(j) = reduced_rhs(a_meas.col(j)) - a * a_meas.col(j);
  }
  const Matrix v = sensor_data - cbar * a_meas;
  NoiseModel out;
  out.samples = static_cast<int>(n_samples);
  out.q_w = w * w.transpose() / static_cast<double>(n_samples);
  out.r_v = v * v.transpose() / static_cast<double>(n_samples);

  if (n_samples < k) {
    out.shrinkage = std::max(0.0, 1.0 - static_cast<double>(n_samples) / k);
    out.warnings.push_back("fewer samples (" + std::to_string(n_samples) +
                           ") than model order (" + std::to_string(k) +
                           "); shrinking toward the diagonal");
    const Matrix d = out.q_w.diagonal().asDiagonal();
    out.q_w = (1.0 - out.shrinkage) * out.q_w + out.shrinkage * d;
  }
  const Eigen::Index s = out.r_v.rows();
  if (s > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(out.r_v);
    const double tr = out.r_v.trace();
    const double floor = tr > 0.0 ? 1e-12 * tr / s : 1e-12;
    if (es.eigenvalues().minCoeff() <= floor) {
      out.r_v += floor * Matrix::Identity(s, s);
      out.regularized = true;
    }
  }
  return out;
}

std::function<Vector(const Vector&)> galerkin_rhs(
    const ReducedModel& model, const NonlinearDynamics& dyn,
    const Vector& steady_state) {
  const Matrix phi = model.phi();
  const Matrix proj = model.W.apply(model.psi()).transpose();
  return [phi, proj, dyn, steady_state](const Vector& a) -> Vector {
    return proj * dyn.rhs(steady_state + phi * a);
  };
}

KalmanResult kalman_gain(const Matrix& a, const Matrix& cbar, const Matrix& q_w,
                         const Matrix& r_v) {
  const Eigen::Index n = a.rows();
  if (cbar.cols() != n || q_w.rows() != n || r_v.rows() != cbar.rows()) {
    throw ValidationError("kalman_gain: inconsistent dimensions");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (r_v + r_v.transpose()));
  if (r_v.rows() > 0 && !(es.eigenvalues().minCoeff() > 0.0)) {
    throw ValidationError("kalman_gain: sensor covariance is not positive "
                          "definite");
  }
  if (detectability_margin(a, cbar) < 1e-10) {
    throw ValidationError("kalman_gain: (A, C) is not detectable; unobservable "
                          "unstable direction among eigenvalues " +
                          describe_unstable(a));
  }
  KalmanResult out;
  const Matrix at = a.transpose();
  const Matrix ct = cbar.transpose();
  out.P = solve_care(at, ct, q_w, r_v);
  out.care_residual = care_residual(at, ct, q_w, r_v, out.P);
  out.L = r_v.llt().solve(cbar * out.P).transpose();
  out.observer_poles = eigenvalues(a - out.L * cbar);
  out.abscissa = n > 0 ? out.observer_poles(0).real()
                       : -std::numeric_limits<double>::infinity();
  if (!(out.abscissa < 0.0)) {
    throw NumericalError("kalman_gain: observer is not stable (abscissa " +
                         format_number(out.abscissa) + ")");
  }
  return out;
}

Compensator make_compensator(const ReducedModel& model, const Matrix& k,
                             const Matrix& l, const SensorMap& sensors) {
  Compensator comp;
  comp.a = model.a();
  comp.b = model.b();
  comp.K = k;
  comp.projection = model.W.apply(model.psi()).transpose();
  if (k.rows() != model.inputs() || k.cols() != model.order()) {
    throw ValidationError("compensator: gain has wrong shape");
  }
  const double ab = spectral_abscissa(comp.a + comp.b * k);
  if (!(ab < 0.0)) {
    throw ValidationError("compensator: A~ + B~K is not stable (abscissa " +
                          format_number(ab) + ")");
  }
  if (l.size() > 0) {
    if (l.rows() != model.order() || l.cols() != sensors.cbar.rows()) {
      throw ValidationError("compensator: observer gain has wrong shape");
    }
    comp.L = l;
    comp.cbar = sensors.cbar;
    comp.sensor_rows = sensors.rows;
    const double ao = spectral_abscissa(comp.a - l * sensors.cbar);
    if (!(ao < 0.0)) {
      throw ValidationError("compensator: A~ - L C_bar is not stable "
                            "(abscissa " + format_number(ao) + ")");
    }
  }
  return comp;
}

std::string to_string(FeedbackMode mode) {
  return mode == FeedbackMode::kFullState ? "full-state" : "observer";
}

FeedbackMode parse_feedback_mode(const std::string& name) {
  if (name == "full-state") return FeedbackMode::kFullState;
  if (name == "observer") return FeedbackMode::kObserver;
  throw ValidationError("unknown feedback mode '" + name +
                        "' (expected full-state or observer)");
}

CsvTable Trace::table() const {
  std::vector<std::string> header{"t", "energy"};
  for (Eigen::Index i = 0; i < a.rows(); ++i) header.push_back("a" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < a_hat.rows(); ++i) header.push_back("ahat" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < u.rows(); ++i) header.push_back("u" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < y.rows(); ++i) header.push_back("y" + std::to_string(i + 1));
  CsvTable out(header);
  for (std::size_t j = 0; j < t.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    std::vector<double> row{t[j], energy[j]};
    for (Eigen::Index i = 0; i < a.rows(); ++i) row.push_back(a(i, c));
    for (Eigen::Index i = 0; i < a_hat.rows(); ++i) row.push_back(a_hat(i, c));
    for (Eigen::Index i = 0; i < u.rows(); ++i) row.push_back(u(i, c));
    for (Eigen::Index i = 0; i < y.rows(); ++i) row.push_back(y(i, c));
    out.add_row(row);
  }
  return out;
}

double Trace::max_energy_after(double from) const {
  double m = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (t[j] >= from) m = std::max(m, energy[j]);
  }
  return m;
}

Trace closed_loop_simulate(const StateSpaceSystem& plant,
                           const Compensator& comp, FeedbackMode mode,
                           const Vector& x0, const Vector& steady_state,
                           const SimulationOptions& options) {
  const int n = plant.states();
  if (x0.size() != n) throw ValidationError("simulate: x0 has wrong size");
  if (!(options.dt > 0.0) || !(options.horizon >= 0.0) ||
      options.record_every < 1) {
    throw ValidationError("simulate: invalid time options");
  }
  if (comp.projection.cols() != n || comp.b.cols() != plant.inputs()) {
    throw ValidationError("simulate: compensator does not match the plant");
  }
  const bool observer = mode == FeedbackMode::kObserver;
  if (observer && comp.L.size() == 0) {
    throw ValidationError("simulate: observer mode needs an observer gain");
  }
  const Vector xss =
      steady_state.size() == n ? steady_state : Vector::Zero(n);
  const bool nonlinear = plant.nonlinear.has_value();
  const double dt = options.dt;
  const int k = static_cast<int>(comp.a.rows());
  const Matrix cs = observer ? sensor_rows_of(plant.C, comp.sensor_rows)
                             : Matrix(0, n);

  std::optional<Propagator> lin;
  std::optional<NonlinearStepper> nl;
  if (nonlinear) {
    nl.emplace(*plant.nonlinear, dt);
  } else {
    if (!plant.A.is_dense()) {
      throw ValidationError("simulate: linear plants must be dense");
    }
    lin.emplace(plant.A, dt, Scheme::kCrankNicolson);
  }
  Matrix obs_step, obs_in;
  if (observer) {
    const Matrix ao = comp.a - comp.L * comp.cbar;
    const Matrix id = Matrix::Identity(k, k);
    const Eigen::PartialPivLU<Matrix> lu(id - 0.5 * dt * ao);
    obs_step = lu.solve(id + 0.5 * dt * ao);
    obs_in = lu.solve(id) * dt;
  }

  const int steps = static_cast<int>(std::llround(options.horizon / dt));
  const int samples = steps / options.record_every + 1;
  Trace tr;
  tr.a.resize(k, samples);
  tr.a_hat = Matrix::Zero(k, samples);
  tr.u.resize(plant.inputs(), samples);
  tr.y.resize(cs.rows(), samples);

  Vector x = x0;
  Vector ahat = Vector::Zero(k);
  bool active = false;
  const double e0 = plant.W.norm(x0 - xss);
  const double ref = e0 > 0.0 ? e0 : 1.0;
  int col = 0;
  for (int step = 0; step <= steps; ++step) {
    const double t = step * dt;
    const Vector dev = x - xss;
    const Vector a = comp.projection * dev;
    const Vector y = cs * dev;
    if (!active && t >= options.turn_on - 1e-12 * dt) {
      active = true;
      ahat.setZero();
    }
    Vector u = Vector::Zero(plant.inputs());
    if (active) u = comp.K * (observer ? ahat : a);
    const double energy = plant.W.norm(dev);

    if (step % options.record_every == 0 && col < samples) {
      tr.t.push_back(t);
      tr.energy.push_back(energy);
      tr.a.col(col) = a;
      tr.a_hat.col(col) = ahat;
      tr.u.col(col) = u;
      tr.y.col(col) = y;
      ++col;
    }
    if (!std::isfinite(energy) || energy > options.blowup_factor * ref) {
      tr.blew_up = true;
      tr.message = "plant energy exceeded " + format_number(options.blowup_factor) +
                   " times its initial value at t=" + format_number(t);
      break;
    }
    if (step == steps) break;

    if (nonlinear) {
      nl->step(x, plant.B * u);
    } else {
      x = lin->matrix() * x + dt * (lin->implicit_inverse() * (plant.B * u));
    }
    if (active && observer) {
      ahat = obs_step * ahat + obs_in * (comp.b * u + comp.L * y);
    }
  }
  tr.a.conservativeResize(k, col);
  tr.a_hat.conservativeResize(k, col);
  tr.u.conservativeResize(plant.inputs(), col);
  tr.y.conservativeResize(cs.rows(), col);
  return tr;
}

Matrix closed_loop_matrix(const StateSpaceSystem& plant,
                          const Compensator& comp, FeedbackMode mode) {
  if (!plant.A.is_dense()) {
    throw ValidationError("closed_loop_matrix: dense plant required");
  }
  const Matrix& a = plant.A.matrix();
  const Eigen::Index n = a.rows();
  if (mode == FeedbackMode::kFullState) {
    return a + plant.B * comp.K * comp.projection;
  }
  const Eigen::Index k = comp.a.rows();
  const Matrix cs = sensor_rows_of(plant.C, comp.sensor_rows);
  Matrix out(n + k, n + k);
  out << a, plant.B * comp.K, comp.L * cs,
      comp.a + comp.b * comp.K - comp.L * comp.cbar;
  return out;
}

}  // namespace ubpod
