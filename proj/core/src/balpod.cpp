#include "ubpod/balpod.hpp"

#include <cmath>
#include <random>

#include "ubpod/io.hpp"

namespace ubpod {

namespace {

// Drops columns of a thin SVD whose singular values are numerically zero.
void trim(SvdResult& d) {
  const double s0 = d.s.size() > 0 ? d.s(0) : 0.0;
  Eigen::Index k = 0;
  while (k < d.s.size() && d.s(k) > 1e-15 * s0) ++k;
  d.U = d.U.leftCols(k).eval();
  d.s = d.s.head(k).eval();
}

// Power iteration on A*A in the W norm.
double operator_norm(const LinearOperator& a, const InnerProductWeight& w) {
  if (a.is_dense() && a.size() <= kDenseSizeCap) {
    const Matrix finv = w.factor_solve(Matrix::Identity(a.size(), a.size()));
    return svd(w.factor(a.matrix()) * finv).s(0);
  }
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  Vector x(a.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
  x /= w.norm(x);
  double est = 0.0;
  for (int it = 0; it < 40; ++it) {
    const Vector y = a.apply(x);
    est = w.norm(y);
    Vector z = a.apply_adjoint(y);
    const double nz = w.norm(z);
    if (nz == 0.0) break;
    x = z / nz;
  }
  return est;
}

}  // namespace

BalanceResult balance(const Matrix& x, const Matrix& z,
                      const InnerProductWeight& w, int r, double tie_tol) {
  if (x.rows() != w.size() || z.rows() != w.size()) {
    throw ValidationError("balance: snapshot rows do not match the weight");
  }
  SvdResult dx = svd(w.factor(x));
  SvdResult dz = svd(w.factor(z));
  trim(dx);
  trim(dz);
  const Matrix core =
      dz.s.asDiagonal() * (dz.U.transpose() * dx.U) * dx.s.asDiagonal();
  const SvdResult dc = svd(core);

  BalanceResult out;
  const double s0 = dc.s.size() > 0 ? dc.s(0) : 0.0;
  int rank = 0;
  while (rank < dc.s.size() && s0 > 0.0 && dc.s(rank) >= 1e-12 * s0) ++rank;
  out.hsv = dc.s.head(rank);
  if (r < 0) r = rank;
  if (r > rank) {
    throw ValidationError("balance: order " + std::to_string(r) +
                          " exceeds the numerical rank of Z'WX; attainable "
                          "order <= " + std::to_string(rank));
  }
  int order = r;
  while (order > 0 && order < rank &&
         std::abs(out.hsv(order - 1) - out.hsv(order)) <=
             tie_tol * out.hsv(order - 1)) {
    ++order;
  }
  out.order = order;
  const Vector scale = out.hsv.head(order).cwiseSqrt().cwiseInverse();
  out.phi = w.factor_solve(dx.U * dx.s.asDiagonal() * dc.V.leftCols(order) *
                           scale.asDiagonal());
  out.psi = w.factor_solve(dz.U * dz.s.asDiagonal() * dc.U.leftCols(order) *
                           scale.asDiagonal());
  return out;
}

BalanceResult balance(const SnapshotMatrix& x, const SnapshotMatrix& z, int r,
                      double tie_tol) {
  if (x.W.hash() != z.W.hash()) {
    throw ValidationError("balance: direct and adjoint snapshots use "
                          "different weights");
  }
  return balance(x.columns, z.columns, x.W, r, tie_tol);
}

Matrix ReducedModel::a() const {
  Matrix out = Matrix::Zero(order(), order());
  out.topLeftCorner(n_u(), n_u()) = a_u;
  out.bottomRightCorner(r(), r()) = a_s;
  return out;
}

Matrix ReducedModel::b() const {
  Matrix out(order(), inputs());
  out << b_u, b_s;
  return out;
}

Matrix ReducedModel::c() const {
  Matrix out(c_s.rows(), order());
  out << c_u, c_s;
  return out;
}

Matrix ReducedModel::chat() const {
  Matrix out = Matrix::Zero(n_u() + chat_s.rows(), order());
  out.topLeftCorner(n_u(), n_u()).setIdentity();
  out.bottomRightCorner(chat_s.rows(), r()) = chat_s;
  return out;
}

Matrix ReducedModel::phi() const {
  Matrix out(states(), order());
  out << phi_u, phi_s;
  return out;
}

Matrix ReducedModel::psi() const {
  Matrix out(states(), order());
  out << psi_u, psi_s;
  return out;
}

ReducedModel assemble_rom(const StateSpaceSystem& sys,
                          const BiorthogonalPair& unstable,
                          const BalanceResult& stable, const PODBasis* theta,
                          const AssembleOptions& options,
                          std::vector<std::string>* warnings) {
  const int n = sys.states();
  if (unstable.phi.rows() != n || stable.phi.rows() != n ||
      stable.psi.rows() != n || unstable.psi.rows() != n) {
    throw ValidationError("assemble_rom: mode dimensions do not match the "
                          "system");
  }
  if (unstable.size() > 0 && unstable.biorthogonality_error() > 1e-8) {
    throw ValidationError("assemble_rom: unstable pair is not bi-orthonormal");
  }
  const InnerProductWeight& w = sys.W;
  ReducedModel m;
  m.W = w;
  m.output_weight = sys.output_weight;
  m.phi_u = unstable.phi;
  m.psi_u = unstable.psi;
  m.phi_s = stable.phi;
  m.psi_s = stable.psi;
  m.hsv = stable.hsv.head(stable.order);

  const Matrix wpsi_u = w.apply(m.psi_u).transpose();
  const Matrix wpsi_s = w.apply(m.psi_s).transpose();
  const Matrix aphi_u = sys.A.apply(m.phi_u);
  const Matrix aphi_s = sys.A.apply(m.phi_s);
  m.a_u = wpsi_u * aphi_u;
  m.a_s = wpsi_s * aphi_s;
  m.b_u = wpsi_u * sys.B;
  m.b_s = wpsi_s * sys.B;

  const double a_norm = operator_norm(sys.A, w);
  const double denom = a_norm > 0.0 ? a_norm : 1.0;
  m.cross_su = (wpsi_s * aphi_u).norm() / denom;
  m.cross_us = (wpsi_u * aphi_s).norm() / denom;
  const double bi_su = (wpsi_s * m.phi_u).norm();
  const double bi_us = (wpsi_u * m.phi_s).norm();
  const double bi_ss =
      (wpsi_s * m.phi_s - Matrix::Identity(m.r(), m.r())).norm();

  m.c_u = sys.C * m.phi_u;
  const Matrix cphi_s = sys.C * m.phi_s;
  if (theta != nullptr) {
    if (theta->modes.rows() != sys.outputs()) {
      throw ValidationError("assemble_rom: output modes do not match C");
    }
    m.coefficient_map =
        sys.output_weight.apply(theta->modes).transpose() * sys.C;
    m.chat_s = m.coefficient_map * m.phi_s;
    m.c_s = theta->modes * m.chat_s;
  } else {
    m.coefficient_map = sys.output_weight.factor(sys.C);
    m.chat_s = m.coefficient_map * m.phi_s;
    m.c_s = cphi_s;
  }

  m.provenance["operator_norm"] = format_number(a_norm);
  m.provenance["cross_su"] = format_number(m.cross_su);
  m.provenance["cross_us"] = format_number(m.cross_us);
  m.provenance["biorth_su"] = format_number(bi_su);
  m.provenance["biorth_us"] = format_number(bi_us);
  m.provenance["biorth_ss"] = format_number(bi_ss);
  m.provenance["output_modes"] =
      theta != nullptr ? std::to_string(theta->size()) : "full";

  if (warnings != nullptr) {
    if (m.cross_coupling() > options.cross_tol) {
      warnings->push_back(
          "cross-coupling " + format_number(m.cross_coupling()) +
          " exceeds tolerance; the unstable eigenspace may be unconverged");
    }
    if (bi_ss > 1e-8) {
      warnings->push_back("stable modes are not bi-orthonormal to "
                          "working precision: " + format_number(bi_ss));
    }
  }
  return m;
}

Vector project_initial_state(const Vector& x0, const ReducedModel& model) {
  if (x0.size() != model.states()) {
    throw ValidationError("project_initial_state: state has wrong dimension");
  }
  return model.W.gram(model.psi(), x0);
}

GramianDiagonals empirical_gramians(const ReducedModel& model) {
  if (model.r() == 0) return {};
  if (!(spectral_abscissa(model.a_s) < 0.0)) {
    throw NumericalError("empirical_gramians: stable block has eigenvalues in "
                         "the closed right half-plane; balancing failed");
  }
  GramianDiagonals out;
  out.controllability =
      solve_lyapunov(model.a_s, model.b_s * model.b_s.transpose()).diagonal();
  out.observability =
      solve_lyapunov(model.a_s.transpose(),
                     model.chat_s.transpose() * model.chat_s)
          .diagonal();
  return out;
}

ImpulseComparison rom_impulse_compare(const ReducedModel& model,
                                      const SnapshotMatrix& x) {
  if (x.columns.rows() != model.states()) {
    throw ValidationError("rom_impulse_compare: snapshots do not match model");
  }
  if (x.sources() != model.inputs()) {
    throw ValidationError("rom_impulse_compare: one impulse run per input is "
                          "required");
  }
  SnapshotOptions opt;
  opt.dt = x.dt;
  opt.spacing = x.spacing;
  opt.n_snapshots = x.per_source();
  opt.quadrature = x.quadrature;
  const StateSpaceSystem rom =
      make_system(model.a_s, model.b_s, model.chat_s);
  const SnapshotMatrix xr = impulse_response(rom, nullptr, opt);

  const Matrix yf = model.coefficient_map * x.columns;
  const Matrix ym = model.chat_s * xr.columns;
  const Vector unscale = x.weights.cwiseSqrt().cwiseInverse();
  ImpulseComparison out;
  out.y_full = yf * unscale.asDiagonal();
  out.y_model = ym * unscale.asDiagonal();
  const Eigen::Index q = yf.rows();
  out.l2_error.resize(q);
  out.relative_error.resize(q);
  out.peak_error.resize(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const double diff = (yf.row(i) - ym.row(i)).norm();
    const double ref = yf.row(i).norm();
    out.l2_error(i) = diff;
    out.relative_error(i) = ref > 0.0 ? diff / ref : diff;
    out.peak_error(i) =
        (out.y_full.row(i) - out.y_model.row(i)).cwiseAbs().maxCoeff();
  }
  return out;
}

std::uint64_t model_hash(const ReducedModel& m) {
  std::uint64_t h = hash_matrix(m.a_u);
  for (const Matrix* p : {&m.a_s, &m.b_u, &m.b_s, &m.c_u, &m.c_s, &m.chat_s,
                          &m.phi_u, &m.psi_u, &m.phi_s, &m.psi_s}) {
    h = hash_matrix(*p, h);
  }
  return hash_matrix(m.hsv, h);
}

}  // namespace ubpod
