#include "ubpod/testbed.hpp"

#include <cmath>
#include <random>

namespace ubpod {

namespace {

Matrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Matrix random_orthogonal(int n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(n, n, rng));
  return qr.householderQ() * Matrix::Identity(n, n);
}

// Fills the real block-diagonal form with `reals` real and `pairs` complex
// eigenvalues starting at `offset`.
void place_block(Matrix& lambda, int& offset, int reals, int pairs,
                 double re_min, double re_max, double im_min, double im_max,
                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> re(re_min, re_max);
  std::uniform_real_distribution<double> im(im_min, im_max);
  for (int p = 0; p < pairs; ++p) {
    const double a = re(rng), b = im(rng);
    lambda(offset, offset) = a;
    lambda(offset + 1, offset + 1) = a;
    lambda(offset, offset + 1) = b;
    lambda(offset + 1, offset) = -b;
    offset += 2;
  }
  for (int r = 0; r < reals; ++r) {
    lambda(offset, offset) = re(rng);
    ++offset;
  }
}

Vector bump(const Vector& x, double center, double width) {
  return (-((x.array() - center) / width).square()).exp().matrix();
}

}  // namespace

void RandomLtiSpec::validate() const {
  if (n < 1 || n_u < 0 || n_u >= n) {
    throw ValidationError("random_lti: need 0 <= n_u < n");
  }
  if (inputs < 1 || outputs < 1) {
    throw ValidationError("random_lti: need at least one input and output");
  }
  if (!(unstable_min > 0.0 && unstable_max >= unstable_min)) {
    throw ValidationError("random_lti: unstable real parts must be positive");
  }
  if (!(stable_max < 0.0 && stable_min <= stable_max)) {
    throw ValidationError("random_lti: stable real parts must be negative");
  }
  if (!(imag_min > 0.0 && imag_max >= imag_min) || !(condition >= 1.0)) {
    throw ValidationError("random_lti: invalid imaginary range or condition");
  }
}

RandomLti random_lti(const RandomLtiSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int n = spec.n;
  const int ns = n - spec.n_u;
  Matrix lambda = Matrix::Zero(n, n);
  int offset = 0;
  place_block(lambda, offset, spec.n_u % 2, spec.n_u / 2, spec.unstable_min,
              spec.unstable_max, spec.imag_min, spec.imag_max, rng);
  const int stable_pairs = ns / 4;
  place_block(lambda, offset, ns - 2 * stable_pairs, stable_pairs,
              spec.stable_min, spec.stable_max, spec.imag_min, spec.imag_max,
              rng);

  const Matrix q1 = random_orthogonal(n, rng);
  const Matrix q2 = random_orthogonal(n, rng);
  Vector s(n);
  for (int i = 0; i < n; ++i) {
    s(i) = n > 1 ? std::pow(spec.condition, static_cast<double>(i) / (n - 1))
                 : 1.0;
  }
  RandomLti out;
  out.lambda = lambda;
  out.v = q1 * s.asDiagonal() * q2.transpose();
  const Matrix vinv = q2 * s.cwiseInverse().asDiagonal() * q1.transpose();
  const Matrix a = out.v * lambda * vinv;
  const Matrix b = gaussian_matrix(n, spec.inputs, rng);
  const Matrix c = gaussian_matrix(spec.outputs, n, rng);
  out.sys = make_system(a, b, c);
  out.eigenvalues = eigenvalues(lambda);
  out.right_unstable = out.v.leftCols(spec.n_u);
  out.left_unstable = vinv.topRows(spec.n_u).transpose();
  return out;
}

std::string to_string(Boundary b) {
  return b == Boundary::kClamped ? "clamped" : "periodic";
}

Boundary parse_boundary(const std::string& name) {
  if (name == "clamped") return Boundary::kClamped;
  if (name == "periodic") return Boundary::kPeriodic;
  throw ValidationError("unknown boundary '" + name +
                        "' (expected clamped or periodic)");
}

void HopfSpec::validate() const {
  if (grid < 32 || grid > 256) {
    throw ValidationError("hopf: grid size must be in [32, 256]");
  }
  if (!(length > 0.0) || !(diffusion_u > 0.0) || !(diffusion_v > 0.0)) {
    throw ValidationError("hopf: length and diffusivities must be positive");
  }
  if (!(growth_width > 0.0) || !(source_width > 0.0) ||
      !(actuator_width > 0.0)) {
    throw ValidationError("hopf: profile widths must be positive");
  }
  if (!(saturation >= 0.0)) {
    throw ValidationError("hopf: saturation must be nonnegative");
  }
  if (actuator_center < 0.0 || actuator_center > length) {
    throw ValidationError("hopf: actuator outside the domain");
  }
  for (double s : sensor_locations) {
    if (s < 0.0 || s > length) {
      throw ValidationError("hopf: sensor location " + std::to_string(s) +
                            " outside the domain");
    }
  }
}

HopfPde::HopfPde(HopfSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const int n = spec_.grid;
  const bool periodic = spec_.boundary == Boundary::kPeriodic;
  h_ = periodic ? spec_.length / n : spec_.length / (n + 1);
  x_.resize(n);
  for (int i = 0; i < n; ++i) x_(i) = periodic ? i * h_ : (i + 1) * h_;

  Matrix d2 = Matrix::Zero(n, n), d1 = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    d2(i, i) = -2.0 / (h_ * h_);
    int left = i - 1, right = i + 1;
    if (periodic) {
      left = (left + n) % n;
      right = right % n;
    }
    if (left >= 0) {
      d2(i, left) += 1.0 / (h_ * h_);
      d1(i, left) -= 0.5 / h_;
    }
    if (right < n) {
      d2(i, right) += 1.0 / (h_ * h_);
      d1(i, right) += 0.5 / h_;
    }
  }
  growth_ = spec_.mu * bump(x_, spec_.growth_center, spec_.growth_width);
  growth_.array() -= spec_.damping;
  source_ = spec_.source_amplitude *
            bump(x_, spec_.source_center, spec_.source_width);

  const Matrix id = Matrix::Identity(n, n);
  const Matrix transport = -spec_.advection * d1;
  linear_.resize(2 * n, 2 * n);
  linear_ << spec_.diffusion_u * d2 + transport + Matrix(growth_.asDiagonal()),
      -spec_.frequency * id, spec_.frequency * id,
      spec_.diffusion_v * d2 + transport + Matrix(growth_.asDiagonal());

  b_ = Matrix::Zero(2 * n, 1);
  b_.col(0).head(n) = bump(x_, spec_.actuator_center, spec_.actuator_width);

  dyn_.linear = linear_;
  const double k = spec_.saturation;
  const Vector source = source_;
  dyn_.remainder = [n, k, source](const Vector& s) -> Vector {
    const auto u = s.head(n).array();
    const auto v = s.tail(n).array();
    const Eigen::ArrayXd r2 = u.square() + v.square();
    Vector out(2 * n);
    out.head(n) = (-k * r2 * u).matrix() + source;
    out.tail(n) = (-k * r2 * v).matrix();
    return out;
  };
  const Matrix lin = linear_;
  dyn_.jacobian = [n, k, lin](const Vector& s) -> Matrix {
    const Eigen::ArrayXd u = s.head(n).array();
    const Eigen::ArrayXd v = s.tail(n).array();
    Matrix j = lin;
    j.diagonal().head(n) -= (k * (3.0 * u.square() + v.square())).matrix();
    j.diagonal().tail(n) -= (k * (u.square() + 3.0 * v.square())).matrix();
    const Vector cross = (-2.0 * k * u * v).matrix();
    j.block(0, n, n, n).diagonal() += cross;
    j.block(n, 0, n, n).diagonal() += cross;
    return j;
  };
}

Vector HopfPde::rhs(const Vector& state) const {
  if (state.size() != states()) throw ValidationError("hopf: wrong state size");
  return dyn_.rhs(state);
}

Matrix HopfPde::jacobian(const Vector& state) const {
  if (state.size() != states()) throw ValidationError("hopf: wrong state size");
  return dyn_.jacobian(state);
}

Vector HopfPde::jacobian_action(const Vector& state, const Vector& v) const {
  const int n = grid();
  if (state.size() != states() || v.size() != states()) {
    throw ValidationError("hopf: wrong state size");
  }
  const double k = spec_.saturation;
  const auto u = state.head(n).array();
  const auto w = state.tail(n).array();
  const auto du = v.head(n).array();
  const auto dw = v.tail(n).array();
  Vector out = linear_ * v;
  out.head(n).array() -=
      k * ((3.0 * u.square() + w.square()) * du + 2.0 * u * w * dw);
  out.tail(n).array() -=
      k * (2.0 * u * w * du + (u.square() + 3.0 * w.square()) * dw);
  return out;
}

std::vector<int> HopfPde::sensor_rows() const {
  std::vector<int> rows;
  for (double s : spec_.sensor_locations) {
    Eigen::Index idx = 0;
    (x_.array() - s).abs().minCoeff(&idx);
    rows.push_back(static_cast<int>(idx));
  }
  return rows;
}

InnerProductWeight HopfPde::weight() const {
  return InnerProductWeight::Diagonal(Vector::Constant(states(), h_));
}

double HopfPde::energy(const Vector& deviation) const {
  return std::sqrt(h_) * deviation.norm();
}

StateSpaceSystem HopfPde::linearization(const Vector& state) const {
  const InnerProductWeight w = weight();
  const int n = states();
  const Matrix j = jacobian(state);
  StateSpaceSystem sys =
      make_system(j, b_, Matrix::Identity(n, n), w, w);
  // W is a multiple of the identity, so the W-adjoint is the transpose.
  sys.A = LinearOperator::FromDensePair(j, j.transpose());
  sys.nonlinear = dyn_;
  return sys;
}

Vector HopfPde::random_state(double amplitude) const {
  std::mt19937_64 rng(spec_.seed);
  std::normal_distribution<double> normal;
  Vector x(states());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
  return amplitude * x / energy(x);
}

NewtonReport hopf_steady_state(const HopfPde& pde, double dt, int steps,
                               const Vector& guess, bool line_search) {
  FixedPointProblem p = fixed_point_problem(pde.dynamics(), dt, steps);
  p.line_search = line_search;
  const Vector x0 = guess.size() == pde.states()
                        ? guess
                        : Vector(Vector::Zero(pde.states()));
  return newton_gmres(p, x0);
}

HopfScan hopf_scan(const HopfSpec& spec, double mu_min, double mu_max,
                   double step, double dt, int steps) {
  if (!(mu_max > mu_min) || !(step > 0.0)) {
    throw ValidationError("hopf_scan: need mu_min < mu_max and step > 0");
  }
  auto at = [&spec](double mu) {
    HopfSpec s = spec;
    s.mu = mu;
    return HopfPde(s);
  };
  const ProblemFamily family = [&](double mu) {
    return fixed_point_problem(at(mu).dynamics(), dt, steps);
  };
  const JacobianFamily jac = [&](double mu, const Vector& x) {
    return at(mu).jacobian(x);
  };
  ContinuationOptions opt;
  opt.start = mu_min;
  opt.stop = mu_max;
  opt.step = step;
  HopfScan out;
  out.branch = continuation(family, jac, Vector::Zero(2 * spec.grid), opt);
  if (!out.branch.bracket) {
    throw NumericalError("hopf_scan: no crossing of the imaginary axis in [" +
                         std::to_string(mu_min) + ", " +
                         std::to_string(mu_max) + "]" +
                         (out.branch.message.empty()
                              ? std::string()
                              : "; " + out.branch.message));
  }
  const auto [lo, hi] = *out.branch.bracket;
  for (const auto& p : out.branch.points) {
    if (p.parameter == lo) {
      out.lower_real = eigenvalues(jac(lo, p.state))(0).real();
    }
    if (p.parameter == hi) {
      out.upper_real = eigenvalues(jac(hi, p.state))(0).real();
    }
  }
  out.confirmed = (out.lower_real < 0.0) != (out.upper_real < 0.0);
  return out;
}

LimitCycle approach_limit_cycle(const HopfPde& pde, const Vector& steady_state,
                                double dt, double transient, double window,
                                int sample_every, double perturbation) {
  if (!(dt > 0.0) || transient < 0.0 || !(window > 0.0) || sample_every < 1) {
    throw ValidationError("limit cycle: invalid time options");
  }
  NonlinearStepper stepper(pde.dynamics(), dt);
  Vector x = steady_state + pde.random_state(perturbation);
  const int n_transient = static_cast<int>(std::llround(transient / dt));
  const int n_window = static_cast<int>(std::llround(window / dt));
  for (int k = 0; k < n_transient; ++k) stepper.step(x);
  LimitCycle out;
  out.samples.resize(pde.states(), n_window / sample_every + 1);
  out.minimum = std::numeric_limits<double>::infinity();
  int col = 0;
  for (int k = 0; k <= n_window; ++k) {
    const double e = pde.energy(x - steady_state);
    out.amplitude = std::max(out.amplitude, e);
    out.minimum = std::min(out.minimum, e);
    if (k % sample_every == 0 && col < out.samples.cols()) {
      out.samples.col(col++) = x;
      out.times.push_back(transient + k * dt);
    }
    if (k < n_window) stepper.step(x);
  }
  if (!x.allFinite()) throw NumericalError("limit cycle: state overflowed");
  out.samples.conservativeResize(Eigen::NoChange, col);
  out.state = x;
  return out;
}

}  // namespace ubpod
