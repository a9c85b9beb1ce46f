#include <gtest/gtest.h>

#include "test_util.hpp"
#include "ubpod/oracle.hpp"

namespace ubpod {
namespace {

using testing::random_matrix;
using testing::random_stable;
using testing::rel_diff;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// Random matrix with eigenvalues +-(0.5..2) spread over both half-planes.
Matrix random_hyperbolic(int n, int n_u, std::uint64_t seed) {
  Vector d(n);
  for (int i = 0; i < n; ++i) {
    d(i) = (i < n_u ? 1.0 : -1.0) * (0.5 + 1.5 * i / std::max(1, n - 1));
  }
  const Matrix v = random_matrix(n, n, seed) + 3.0 * Matrix::Identity(n, n);
  return v * d.asDiagonal() * v.inverse();
}

TEST(Decouple, BlockDiagonalNeedsNoTransform) {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << 2.0, -1.0, -3.0;
  const auto d = decouple(a, Matrix::Ones(3, 1), Matrix::Ones(1, 3));
  ASSERT_EQ(d.n_u(), 1);
  EXPECT_NEAR(std::abs(d.t_u(0, 0)), 1.0, 1e-14);
  EXPECT_LE(d.t_u.bottomRows(2).norm(), 1e-14);
  // The stable columns span e2, e3 and carry no unstable component.
  EXPECT_LE(d.t_s.row(0).norm(), 1e-14);
  EXPECT_LE(d.reconstruction_error(a), 1e-14);
}

TEST(Decouple, HandSolvedTwoByTwo) {
  Matrix a(2, 2);
  a << 1.0, 1.0, 0.0, -1.0;
  const auto d = decouple(a, Matrix::Ones(2, 1), Matrix::Ones(1, 2));
  ASSERT_EQ(d.n_u(), 1);
  // T_u along e1, S_u along (1, 1/2), S_u' T_u = 1.
  EXPECT_NEAR(d.t_u(1, 0), 0.0, 1e-14);
  EXPECT_NEAR(d.s_u(1, 0) / d.s_u(0, 0), 0.5, 1e-14);
  EXPECT_NEAR((d.s_u.transpose() * d.t_u)(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(d.a_u(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(d.a_s(0, 0), -1.0, 1e-14);
}

TEST(Decouple, RandomReconstructs) {
  const Matrix a = random_hyperbolic(8, 3, 21);
  const auto d = decouple(a, random_matrix(8, 2, 22), random_matrix(2, 8, 23));
  ASSERT_EQ(d.n_u(), 3);
  EXPECT_LE(d.reconstruction_error(a), 1e-9);
  EXPECT_LE((d.s_u.transpose() * d.t_u - Matrix::Identity(3, 3)).norm(), 1e-9);
  EXPECT_LE((d.s_s.transpose() * d.t_s - Matrix::Identity(5, 5)).norm(), 1e-9);
  EXPECT_LE((d.s_u.transpose() * d.t_s).norm(), 1e-9);
  EXPECT_LE((d.s_s.transpose() * d.t_u).norm(), 1e-9);
  for (const auto& l : eigenvalues(d.a_u)) EXPECT_GT(l.real(), 0.0);
  for (const auto& l : eigenvalues(d.a_s)) EXPECT_LT(l.real(), 0.0);
}

TEST(Decouple, AxisEigenvalueRejected) {
  Matrix a(2, 2);
  a << 0.0, -1.0, 1.0, 0.0;
  EXPECT_THROW(decouple(a, Matrix::Ones(2, 1), Matrix::Ones(1, 2)),
               ValidationError);
}

TEST(FrequencyGramians, StableScalar) {
  const auto g = freq_domain_gramians(scalar(-1.0), scalar(1.0), scalar(1.0));
  EXPECT_TRUE(g.converged);
  EXPECT_NEAR(g.wc(0, 0), 0.5, 1e-9);
  EXPECT_NEAR(g.wo(0, 0), 0.5, 1e-9);
}

TEST(FrequencyGramians, UnstableScalarMatchesReflectedSystem) {
  const auto g = freq_domain_gramians(scalar(1.0), scalar(1.0), scalar(1.0));
  EXPECT_NEAR(g.wc(0, 0), 0.5, 1e-9);
  const Matrix reflected = solve_lyapunov(scalar(-1.0), scalar(1.0));
  EXPECT_NEAR(g.wc(0, 0), reflected(0, 0), 1e-9);
}

TEST(FrequencyGramians, ParsevalOnRandomStable) {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    const Matrix a = random_stable(5, seed, 0.4);
    const Matrix b = random_matrix(5, 2, seed + 100);
    const Matrix c = random_matrix(3, 5, seed + 200);
    const auto g = freq_domain_gramians(a, b, c);
    EXPECT_LE(rel_diff(g.wc, solve_lyapunov(a, b * b.transpose())), 1e-6);
    EXPECT_LE(rel_diff(g.wo, solve_lyapunov(a.transpose(), c.transpose() * c)),
              1e-6);
    EXPECT_LE((g.wc - g.wc.transpose()).norm(), 1e-12 * g.wc.norm());
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(g.wc).eigenvalues().minCoeff(),
              -1e-10 * g.wc.norm());
  }
}

TEST(ExactBtStable, HalfReachableDiagonal) {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << -1.0, -2.0;
  const Matrix b = Matrix::Identity(2, 1);
  const Matrix c = Matrix::Identity(1, 2);
  const BalancedTruncation bt = exact_bt_stable(a, b, c);
  ASSERT_EQ(bt.hsv.size(), 2);
  EXPECT_NEAR(bt.hsv(0), 0.5, 1e-12);
  EXPECT_NEAR(bt.hsv(1), 0.0, 1e-12);
  EXPECT_EQ(bt.order, 1);
}

TEST(ExactBtStable, SimilarityInvariant) {
  const Matrix a = random_stable(6, 41, 0.3);
  const Matrix b = random_matrix(6, 2, 42);
  const Matrix c = random_matrix(2, 6, 43);
  const Vector base = exact_bt_stable(a, b, c).hsv;
  for (std::uint64_t seed : {44u, 45u}) {
    const Matrix t = random_matrix(6, 6, seed) + 3.0 * Matrix::Identity(6, 6);
    const Matrix ti = t.inverse();
    const Vector moved = exact_bt_stable(t * a * ti, t * b, c * ti).hsv;
    EXPECT_LE((moved - base).norm() / base.norm(), 1e-9);
  }
}

TEST(ExactBtStable, BalancedGramiansAreDiagonalHsvs) {
  const Matrix a = random_stable(6, 51, 0.3);
  const Matrix b = random_matrix(6, 2, 52);
  const Matrix c = random_matrix(2, 6, 53);
  const BalancedTruncation bt = exact_bt_stable(a, b, c);
  ASSERT_EQ(bt.order, 6);
  const Matrix wc = solve_lyapunov(bt.a, bt.b * bt.b.transpose());
  const Matrix wo = solve_lyapunov(bt.a.transpose(), bt.c.transpose() * bt.c);
  const Matrix sigma = bt.hsv.asDiagonal();
  EXPECT_LE((wc - sigma).norm() / bt.hsv(0), 1e-9);
  EXPECT_LE((wo - sigma).norm() / bt.hsv(0), 1e-9);
  for (Eigen::Index i = 1; i < bt.hsv.size(); ++i) {
    EXPECT_LE(bt.hsv(i), bt.hsv(i - 1));
  }
  EXPECT_LE((bt.s.transpose() * bt.t - Matrix::Identity(6, 6)).norm(), 1e-9);
}

TEST(ExactBtUnstable, Scalar) {
  const auto bt = exact_bt_unstable(scalar(1.0), scalar(1.0), scalar(1.0));
  ASSERT_EQ(bt.hsv_u.size(), 1);
  EXPECT_NEAR(bt.hsv_u(0), 0.5, 1e-12);
  EXPECT_EQ(bt.hsv_s.size(), 0);
  EXPECT_EQ(bt.r_u, 1);
}

TEST(ExactBtUnstable, StableOnlyMatchesStableMethod) {
  const Matrix a = random_stable(5, 61, 0.3);
  const Matrix b = random_matrix(5, 1, 62);
  const Matrix c = random_matrix(2, 5, 63);
  const auto u = exact_bt_unstable(a, b, c);
  const auto s = exact_bt_stable(a, b, c);
  EXPECT_EQ(u.r_u, 0);
  ASSERT_EQ(u.hsv_s.size(), s.hsv.size());
  EXPECT_LE((u.hsv_s - s.hsv).norm(), 1e-9 * s.hsv(0));
}

TEST(ExactBtUnstable, UnstableModesKeptAndTruncatable) {
  const Matrix a = random_hyperbolic(8, 2, 71);
  const Matrix b = random_matrix(8, 1, 72);
  const Matrix c = random_matrix(2, 8, 73);
  const auto full = exact_bt_unstable(a, b, c, -1, 3);
  EXPECT_EQ(full.r_u, 2);
  EXPECT_EQ(full.r_s, 3);
  EXPECT_EQ(full.a.rows(), 5);
  for (const auto& l : eigenvalues(full.a.topLeftCorner(2, 2))) {
    EXPECT_GT(l.real(), 0.0);
  }
  EXPECT_LE((full.psi.transpose() * full.phi - Matrix::Identity(5, 5)).norm(),
            1e-8);
  const auto cut = exact_bt_unstable(a, b, c, 1, 3);
  EXPECT_EQ(cut.r_u, 1);
}

TEST(ProjectedGramianCheck, BlockDiagonalExact) {
  Matrix a = Matrix::Zero(4, 4);
  a.diagonal() << 0.7, -0.5, -1.0, -2.0;
  const auto rep = projected_gramian_check(a, random_matrix(4, 1, 81),
                                           random_matrix(2, 4, 82));
  EXPECT_EQ(rep.n_u, 1);
  EXPECT_LE(rep.worst(), 1e-12);
}

TEST(ProjectedGramianCheck, RandomHyperbolic) {
  const Matrix a = random_hyperbolic(8, 2, 91);
  const auto rep = projected_gramian_check(a, random_matrix(8, 2, 92),
                                           random_matrix(2, 8, 93));
  EXPECT_EQ(rep.n_u, 2);
  EXPECT_LE(rep.worst(), 1e-8);
}

TEST(ProjectedGramianCheck, DiscrepancyTracksPerturbation) {
  const Matrix a = random_hyperbolic(8, 2, 91);
  const Matrix b = random_matrix(8, 2, 92);
  const Matrix c = random_matrix(2, 8, 93);
  const double d3 = projected_gramian_check(a, b, c, 1e-3).worst();
  const double d4 = projected_gramian_check(a, b, c, 1e-4).worst();
  EXPECT_GT(d3, 1e-8);
  // Linear response: a tenfold larger perturbation gives roughly tenfold
  // larger discrepancy.
  EXPECT_GT(d3 / d4, 5.0);
  EXPECT_LT(d3 / d4, 20.0);
}

TEST(Oracle, StableHsvsMatchSnapshotPipeline) {
  RandomLtiSpec spec;
  spec.n = 8;
  spec.n_u = 2;
  spec.seed = 5;
  const RandomLti lti = random_lti(spec);
  EigenspaceOptions eopt;
  eopt.tol = 1e-11;
  const UnstablePair up = extract_unstable_pair(lti.sys, eopt);
  const StableProjector proj = stable_projector(up.pair);
  double decay = 1e300;
  for (const auto& l : lti.eigenvalues) {
    if (l.real() < 0.0) decay = std::min(decay, -l.real());
  }
  SnapshotOptions so;
  so.dt = 1e-3;
  so.spacing = 1;
  so.quadrature = Quadrature::kMidpoint;
  so.n_snapshots = static_cast<int>(12.0 / decay / so.dt);
  const SnapshotMatrix xs = impulse_response(lti.sys, &proj, so);
  const SnapshotMatrix zs = adjoint_response(
      lti.sys, &proj, adjoint_initial_states(lti.sys, nullptr), so);
  const BalanceResult bal = balance(xs, zs, -1);
  const auto ex = exact_bt_unstable(lti.sys.A.matrix(), lti.sys.B, lti.sys.C);
  for (Eigen::Index i = 0; i < ex.hsv_s.size(); ++i) {
    if (ex.hsv_s(i) < 1e-6 * ex.hsv_s(0)) break;
    EXPECT_LE(std::abs(bal.hsv(i) - ex.hsv_s(i)) / ex.hsv_s(i), 0.02) << i;
  }
}

}  // namespace
}  // namespace ubpod
