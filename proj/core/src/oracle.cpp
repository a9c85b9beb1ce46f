#include "ubpod/oracle.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

namespace ubpod {

namespace {

void check_abc(const Matrix& a, const Matrix& b, const Matrix& c,
               const char* what) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || c.cols() != a.rows()) {
    throw ValidationError(std::string(what) + ": inconsistent dimensions");
  }
  if (a.rows() > kDenseSizeCap) {
    throw ValidationError(std::string(what) + ": dense oracle limited to n <= " +
                          std::to_string(kDenseSizeCap));
  }
  if (!a.allFinite() || !b.allFinite() || !c.allFinite()) {
    throw ValidationError(std::string(what) + ": non-finite input");
  }
}

// L with L L' = G for symmetric positive semidefinite G.
Matrix psd_factor(const Matrix& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (g + g.transpose()));
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

// Orthonormal basis of the orthogonal complement of span(m).
Matrix complement_basis(const Matrix& m) {
  const Eigen::Index n = m.rows();
  const Eigen::Index k = m.cols();
  if (k == 0) return Matrix::Identity(n, n);
  Eigen::HouseholderQR<Matrix> qr(m);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - k);
}

double relative_difference(const Matrix& x, const Matrix& ref) {
  const double scale = ref.norm();
  const double diff = (x - ref).norm();
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace

DenseRealization euclidean_realization(const StateSpaceSystem& sys,
                                       const PODBasis* theta) {
  const int n = sys.states();
  if (!sys.A.is_dense()) {
    throw ValidationError("euclidean_realization: dense A required");
  }
  if (n > kDenseSizeCap) {
    throw ValidationError("euclidean_realization: n exceeds the dense cap");
  }
  const Matrix finv = sys.W.factor_solve(Matrix::Identity(n, n));
  DenseRealization out;
  out.A = sys.W.factor(sys.A.matrix()) * finv;
  out.B = sys.W.factor(sys.B);
  if (theta != nullptr) {
    if (theta->modes.rows() != sys.outputs()) {
      throw ValidationError("euclidean_realization: output modes do not match C");
    }
    out.C = sys.output_weight.apply(theta->modes).transpose() * sys.C * finv;
  } else {
    out.C = sys.output_weight.factor(sys.C) * finv;
  }
  return out;
}

double DecoupledRealization::reconstruction_error(const Matrix& a) const {
  const Eigen::Index nu = a_u.rows();
  const Eigen::Index n = nu + a_s.rows();
  Matrix t(n, n), sinv(n, n), d = Matrix::Zero(n, n);
  t << t_u, t_s;
  sinv << s_u.transpose(), s_s.transpose();
  d.topLeftCorner(nu, nu) = a_u;
  d.bottomRightCorner(n - nu, n - nu) = a_s;
  return relative_difference(t * d * sinv, a);
}

DecoupledRealization decouple(const Matrix& a, const Matrix& b,
                              const Matrix& c, double axis_tol) {
  check_abc(a, b, c, "decouple");
  const Eigen::Index n = a.rows();
  const double scale = std::max(1.0, a.norm());
  for (const auto& l : eigenvalues(a)) {
    if (std::abs(l.real()) <= axis_tol * scale) {
      throw ValidationError("decouple: eigenvalue " + std::to_string(l.real()) +
                            (l.imag() >= 0 ? "+" : "") + std::to_string(l.imag()) +
                            "i lies on the imaginary axis; A is not hyperbolic");
    }
  }
  const SchurResult sch = ordered_schur(a, SchurOrder::kUnstableFirst);
  const Eigen::Index k = sch.selected;
  const Matrix t11 = sch.T.topLeftCorner(k, k);
  const Matrix t12 = sch.T.topRightCorner(k, n - k);
  const Matrix t22 = sch.T.bottomRightCorner(n - k, n - k);
  const Matrix u1 = sch.U.leftCols(k);
  const Matrix u2 = sch.U.rightCols(n - k);
  const Matrix x = (k > 0 && k < n) ? solve_sylvester(t11, -t22, -t12)
                                    : Matrix::Zero(k, n - k);
  DecoupledRealization out;
  out.t_u = u1;
  out.t_s = u1 * x + u2;
  out.s_u = u1 - u2 * x.transpose();
  out.s_s = u2;
  out.a_u = t11;
  out.a_s = t22;
  out.b_u = out.s_u.transpose() * b;
  out.b_s = out.s_s.transpose() * b;
  out.c_u = c * out.t_u;
  out.c_s = c * out.t_s;
  return out;
}

FrequencyGramians freq_domain_gramians(const Matrix& a, const Matrix& b,
                                       const Matrix& c,
                                       const FrequencyOptions& options) {
  check_abc(a, b, c, "freq_domain_gramians");
  const Eigen::Index n = a.rows();
  FrequencyGramians out;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  const ComplexVector ev = eigenvalues(a);
  double lmax = 0.0, lmin = std::numeric_limits<double>::infinity();
  for (const auto& l : ev) {
    if (std::abs(l.real()) <= 1e-10 * std::max(1.0, a.norm())) {
      throw ValidationError("freq_domain_gramians: A is not hyperbolic");
    }
    lmax = std::max(lmax, std::abs(l));
    lmin = std::min(lmin, std::abs(l));
  }
  const double wmax = options.omega_max > 0 ? options.omega_max : 1e3 * lmax;
  const double wmin = options.omega_min > 0 ? options.omega_min : 1e-4 * lmin;
  if (!(wmin < wmax) || options.n_quad < 2) {
    throw ValidationError("freq_domain_gramians: invalid frequency range");
  }

  const ComplexMatrix ac = a.cast<std::complex<double>>();
  const ComplexMatrix bc = b.cast<std::complex<double>>();
  const ComplexMatrix ct = c.transpose().cast<std::complex<double>>();
  const ComplexMatrix act = ac.transpose();
  const ComplexMatrix eye = ComplexMatrix::Identity(n, n);
  // Integrand in s = log(omega): omega Re[R X X' R^H].
  auto integrand = [&](double s, Matrix& fc, Matrix& fo) {
    const double w = std::exp(s);
    const std::complex<double> iw(0.0, w);
    const ComplexMatrix rb = (iw * eye - ac).partialPivLu().solve(bc);
    const ComplexMatrix rc = (iw * eye - act).partialPivLu().solve(ct);
    fc = w * (rb * rb.adjoint()).real();
    fo = w * (rc * rc.adjoint()).real();
  };

  const double s0 = std::log(wmin), s1 = std::log(wmax);
  int intervals = options.n_quad;
  double h = (s1 - s0) / intervals;
  Matrix tc = Matrix::Zero(n, n), to = Matrix::Zero(n, n), fc, fo;
  for (int i = 0; i <= intervals; ++i) {
    integrand(s0 + i * h, fc, fo);
    const double wt = (i == 0 || i == intervals) ? 0.5 : 1.0;
    tc += wt * fc;
    to += wt * fo;
  }
  // Romberg tables kept only for the last row.
  std::vector<Matrix> rc_prev{h * tc}, ro_prev{h * to};
  Matrix sum_c = tc, sum_o = to;

  const Eigen::PartialPivLU<Matrix> alu(a);
  const Matrix r0b = alu.solve(b);
  const Matrix r0c = alu.transpose().solve(c.transpose());
  const Matrix head_c = wmin * r0b * r0b.transpose();
  const Matrix head_o = wmin * r0c * r0c.transpose();
  const Matrix tail_c = b * b.transpose() / wmax;
  const Matrix tail_o = c.transpose() * c / wmax;

  Matrix best_c = rc_prev[0], best_o = ro_prev[0];
  out.achieved_tol = std::numeric_limits<double>::infinity();
  for (int d = 0; d < options.max_doublings; ++d) {
    const double hn = h / 2;
    for (int i = 0; i < intervals; ++i) {
      integrand(s0 + (2 * i + 1) * hn, fc, fo);
      sum_c += fc;
      sum_o += fo;
    }
    intervals *= 2;
    h = hn;
    std::vector<Matrix> rc_row{h * sum_c}, ro_row{h * sum_o};
    double factor = 1.0;
    for (std::size_t j = 1; j <= rc_prev.size(); ++j) {
      factor *= 4.0;
      rc_row.push_back(rc_row[j - 1] + (rc_row[j - 1] - rc_prev[j - 1]) / (factor - 1));
      ro_row.push_back(ro_row[j - 1] + (ro_row[j - 1] - ro_prev[j - 1]) / (factor - 1));
    }
    const double change =
        std::max(relative_difference(rc_row.back(), best_c),
                 relative_difference(ro_row.back(), best_o));
    best_c = rc_row.back();
    best_o = ro_row.back();
    rc_prev = std::move(rc_row);
    ro_prev = std::move(ro_row);
    out.achieved_tol = change;
    if (change <= options.tol) {
      out.converged = true;
      break;
    }
  }
  out.nodes = intervals + 1;
  out.wc = (head_c + best_c + tail_c) / std::numbers::pi;
  out.wo = (head_o + best_o + tail_o) / std::numbers::pi;
  out.wc = 0.5 * (out.wc + out.wc.transpose());
  out.wo = 0.5 * (out.wo + out.wo.transpose());
  if (!out.converged) {
    throw NumericalError("freq_domain_gramians: quadrature did not converge; "
                         "achieved relative change " +
                         std::to_string(out.achieved_tol));
  }
  return out;
}

BalancedTruncation exact_bt_stable(const Matrix& a, const Matrix& b,
                                   const Matrix& c, int r) {
  check_abc(a, b, c, "exact_bt_stable");
  const Eigen::Index n = a.rows();
  BalancedTruncation out;
  if (n == 0) {
    out.a = a;
    out.b = b;
    out.c = c;
    out.t = Matrix(0, 0);
    out.s = Matrix(0, 0);
    return out;
  }
  if (!(spectral_abscissa(a) < 0.0)) {
    throw ValidationError("exact_bt_stable: A is not stable");
  }
  const Matrix wc = solve_lyapunov(a, b * b.transpose());
  const Matrix wo = solve_lyapunov(a.transpose(), c.transpose() * c);
  const Matrix lc = psd_factor(wc);
  const Matrix lo = psd_factor(wo);
  const SvdResult d = svd(lo.transpose() * lc);
  out.hsv = d.s;
  const double s0 = d.s(0);
  int rank = 0;
  while (rank < d.s.size() && s0 > 0.0 && d.s(rank) > 1e-13 * s0) ++rank;
  const int order = r < 0 ? rank : std::min(r, rank);
  out.order = order;
  const Vector scale = d.s.head(order).cwiseSqrt().cwiseInverse();
  out.t = lc * d.V.leftCols(order) * scale.asDiagonal();
  out.s = lo * d.U.leftCols(order) * scale.asDiagonal();
  out.a = out.s.transpose() * a * out.t;
  out.b = out.s.transpose() * b;
  out.c = c * out.t;
  return out;
}

UnstableBalancedTruncation exact_bt_unstable(const Matrix& a, const Matrix& b,
                                             const Matrix& c, int r_u,
                                             int r_s) {
  const DecoupledRealization dec = decouple(a, b, c);
  UnstableBalancedTruncation out;
  const BalancedTruncation bu =
      exact_bt_stable(-dec.a_u, dec.b_u, dec.c_u, r_u);
  const BalancedTruncation bs = exact_bt_stable(dec.a_s, dec.b_s, dec.c_s, r_s);
  out.hsv_u = bu.hsv;
  out.hsv_s = bs.hsv;
  out.r_u = bu.order;
  out.r_s = bs.order;
  const Eigen::Index n = a.rows();
  const int k = out.r_u + out.r_s;
  out.phi.resize(n, k);
  out.psi.resize(n, k);
  out.phi << dec.t_u * bu.t, dec.t_s * bs.t;
  out.psi << dec.s_u * bu.s, dec.s_s * bs.s;
  out.a = Matrix::Zero(k, k);
  out.a.topLeftCorner(out.r_u, out.r_u) = -bu.a;
  out.a.bottomRightCorner(out.r_s, out.r_s) = bs.a;
  out.b.resize(k, b.cols());
  out.b << bu.b, bs.b;
  out.c.resize(c.rows(), k);
  out.c << bu.c, bs.c;
  return out;
}

EquivalenceReport projected_gramian_check(const Matrix& a, const Matrix& b,
                                          const Matrix& c, double perturbation,
                                          std::uint64_t seed) {
  const DecoupledRealization dec = decouple(a, b, c);
  const Eigen::Index n = a.rows();
  const Eigen::Index nu = dec.n_u();
  EquivalenceReport out;
  out.n_u = static_cast<int>(nu);
  out.perturbation = perturbation;

  Matrix phi_u = dec.t_u;
  Matrix psi_u = dec.s_u;
  if (perturbation != 0.0 && nu > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix g(n, nu);
    for (Eigen::Index j = 0; j < nu; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);
    }
    psi_u += perturbation * psi_u.norm() / g.norm() * g;
    // Restore Psi' Phi = I so the projector stays idempotent.
    psi_u = psi_u * (phi_u.transpose() * psi_u).inverse();
  }
  const Matrix ps = Matrix::Identity(n, n) - phi_u * psi_u.transpose();

  // Controllability on Range(P_s) = ker(Psi_u').
  const Matrix v = complement_basis(psi_u);
  const Matrix a_r = v.transpose() * ps * a * v;
  const Matrix b_r = v.transpose() * ps * b;
  const Matrix wc_proj =
      v * solve_lyapunov(a_r, b_r * b_r.transpose()) * v.transpose();
  const Matrix wc_ref = dec.t_s *
                        solve_lyapunov(dec.a_s, dec.b_s * dec.b_s.transpose()) *
                        dec.t_s.transpose();

  // Observability on Range(P_s') = ker(Phi_u').
  const Matrix vz = complement_basis(phi_u);
  const Matrix az = vz.transpose() * ps.transpose() * a.transpose() * vz;
  const Matrix cz = vz.transpose() * ps.transpose() * c.transpose();
  const Matrix wo_proj =
      vz * solve_lyapunov(az, cz * cz.transpose()) * vz.transpose();
  const Matrix wo_ref =
      dec.s_s *
      solve_lyapunov(dec.a_s.transpose(), dec.c_s.transpose() * dec.c_s) *
      dec.s_s.transpose();

  out.controllability = relative_difference(wc_proj, wc_ref);
  out.observability = relative_difference(wo_proj, wo_ref);
  return out;
}

}  // namespace ubpod
