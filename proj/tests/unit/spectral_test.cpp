#include <gtest/gtest.h>

#include "test_util.hpp"
#include "ubpod/spectral.hpp"
#include "ubpod/testbed.hpp"

namespace ubpod {
namespace {

using testing::random_matrix;
using testing::rel_diff;

StateSpaceSystem dense_system(const Matrix& a,
                              const InnerProductWeight& w = {}) {
  const int n = static_cast<int>(a.rows());
  const auto ww = w.size() == 0 ? InnerProductWeight::Identity(n) : w;
  return make_system(a, Matrix::Ones(n, 1), Matrix::Ones(1, n), ww);
}

Matrix unit_cols(int n, int k) { return Matrix::Identity(n, n).leftCols(k); }

TEST(UnstableEigenspace, SingleRealEigenvalue) {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << 1.0, -1.0, -2.0;
  const auto w = InnerProductWeight::Identity(3);
  const EigenspaceResult r = unstable_eigenspace(dense_system(a), Side::kRight);
  EXPECT_EQ(r.n_unstable, 1);
  EXPECT_LE(subspace_distance(r.basis, unit_cols(3, 1), w), 1e-8);
  EXPECT_NEAR(r.ritz_values(0).real(), 1.0, 1e-8);
}

TEST(UnstableEigenspace, RotatingGrowthBlock) {
  Matrix a = Matrix::Zero(3, 3);
  a.topLeftCorner(2, 2) << 0.1, -1.0, 1.0, 0.1;
  a(2, 2) = -1.0;
  const auto w = InnerProductWeight::Identity(3);
  const EigenspaceResult r = unstable_eigenspace(dense_system(a), Side::kRight);
  EXPECT_EQ(r.n_unstable, 2);
  EXPECT_LE(subspace_distance(r.basis, unit_cols(3, 2), w), 1e-8);
}

TEST(UnstableEigenspace, StableSystemGivesEmptyBasis) {
  Matrix a = -Matrix::Identity(4, 4);
  a(0, 1) = 0.5;
  const EigenspaceResult r = unstable_eigenspace(dense_system(a), Side::kRight);
  EXPECT_EQ(r.n_unstable, 0);
  EXPECT_EQ(r.basis.cols(), 0);
}

TEST(UnstableEigenspace, PrescribedSpectrumRecovered) {
  RandomLtiSpec spec;
  spec.n = 20;
  spec.n_u = 3;
  spec.seed = 4;
  const RandomLti lti = random_lti(spec);
  const auto w = lti.sys.W;
  const UnstablePair up = extract_unstable_pair(lti.sys);
  ASSERT_EQ(up.pair.size(), 3);
  EXPECT_LE(subspace_distance(w_orthonormalize(up.pair.phi, w),
                              w_orthonormalize(lti.right_unstable, w), w),
            1e-6);
  EXPECT_LE(subspace_distance(w_orthonormalize(up.pair.psi, w),
                              w_orthonormalize(lti.left_unstable, w), w),
            1e-6);
  // Ritz values against the dense spectrum.
  const ComplexVector dense = eigenvalues(lti.sys.A.matrix());
  for (const auto& ritz : up.right.ritz_values) {
    double best = 1e300;
    for (Eigen::Index i = 0; i < 3; ++i) {
      best = std::min(best, std::abs(ritz - dense(i)));
    }
    EXPECT_LE(best, 1e-6);
  }
}

TEST(UnstableEigenspace, TooManyUnstableModes) {
  Matrix a = Matrix::Identity(5, 5);
  a(4, 4) = -1.0;
  EigenspaceOptions opt;
  opt.k_max = 2;
  EXPECT_THROW(unstable_eigenspace(dense_system(a), Side::kRight, opt),
               ValidationError);
}

TEST(Biorthonormalize, TrivialPairs) {
  const auto w = InnerProductWeight::Identity(3);
  const Matrix e1 = unit_cols(3, 1);
  const BiorthogonalPair same = biorthonormalize(e1, e1, w);
  EXPECT_LE((same.phi - e1).norm(), 1e-15);
  EXPECT_LE((same.psi - e1).norm(), 1e-15);
  // The right basis is normalized and the scale moves into the left one.
  const BiorthogonalPair scaled = biorthonormalize(2.0 * e1, e1, w);
  EXPECT_LE((scaled.phi - e1).norm(), 1e-15);
  EXPECT_LE((scaled.psi - e1).norm(), 1e-15);
}

TEST(Biorthonormalize, RandomFullRank) {
  const auto w = InnerProductWeight::Diagonal(Vector::LinSpaced(10, 0.5, 2.0));
  const BiorthogonalPair p =
      biorthonormalize(random_matrix(10, 2, 1), random_matrix(10, 2, 2), w);
  EXPECT_LE(p.biorthogonality_error(), 1e-12);
}

TEST(Biorthonormalize, OrthogonalSpacesRejected) {
  const auto w = InnerProductWeight::Identity(3);
  EXPECT_THROW(biorthonormalize(unit_cols(3, 1),
                                Matrix(Matrix::Identity(3, 3).col(1)), w),
               NumericalError);
}

class ProjectorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    RandomLtiSpec spec;
    spec.n = 12;
    spec.n_u = 2;
    spec.seed = 9;
    lti_ = random_lti(spec);
    const BiorthogonalPair pair =
        biorthonormalize(lti_.right_unstable, lti_.left_unstable, lti_.sys.W);
    projector_ = stable_projector(pair);
  }
  RandomLti lti_;
  StableProjector projector_;
};

TEST_F(ProjectorTest, AnnihilatesUnstableDirections) {
  const BiorthogonalPair& p = projector_.pair();
  EXPECT_LE(projector_.apply(p.phi).norm() / p.phi.norm(), 1e-10);
  EXPECT_LE(projector_.apply_adjoint(p.psi).norm() / p.psi.norm(), 1e-10);
}

TEST_F(ProjectorTest, Idempotent) {
  const Matrix x = random_matrix(12, 3, 10);
  const Matrix once = projector_.apply(x);
  EXPECT_LE((projector_.apply(once) - once).norm() / once.norm(), 1e-12);
}

TEST_F(ProjectorTest, RangeIsInvariant) {
  const Matrix a = lti_.sys.A.matrix();
  for (std::uint64_t seed = 11; seed < 16; ++seed) {
    const Vector x = random_matrix(12, 1, seed).col(0);
    const Vector ax = a * projector_.apply(x);
    EXPECT_LE((ax - projector_.apply(ax)).norm() / x.norm(), 1e-6);
  }
}

TEST(Projector, NormalOperatorGivesOrthogonalProjector) {
  // Normal A: orthogonal eigenvectors, so P_s is the orthogonal projector.
  const Matrix q = w_orthonormalize(random_matrix(6, 6, 17),
                                    InnerProductWeight::Identity(6));
  Vector d(6);
  d << 0.7, 0.3, -0.5, -1.0, -1.5, -2.0;
  const Matrix a = q * d.asDiagonal() * q.transpose();
  const auto sys = dense_system(a);
  const UnstablePair up = extract_unstable_pair(sys);
  ASSERT_EQ(up.pair.size(), 2);
  const Matrix ps = stable_projector(up.pair).apply(Matrix::Identity(6, 6));
  const Matrix qs = q.rightCols(4);
  EXPECT_LE((ps - qs * qs.transpose()).norm(), 1e-8);
}

TEST(Projector, RejectsBrokenPair) {
  BiorthogonalPair p;
  p.W = InnerProductWeight::Identity(2);
  p.phi = Matrix::Identity(2, 2).leftCols(1);
  p.psi = 2.0 * p.phi;
  EXPECT_THROW(stable_projector(p), ValidationError);
}

TEST(Projector, HashTracksBases) {
  const auto w = InnerProductWeight::Identity(3);
  const auto p1 = stable_projector(biorthonormalize(unit_cols(3, 1),
                                                    unit_cols(3, 1), w));
  Matrix other = unit_cols(3, 1);
  other(1, 0) = 0.5;
  const auto p2 = stable_projector(biorthonormalize(unit_cols(3, 1), other, w));
  EXPECT_NE(p1.hash(), p2.hash());
  EXPECT_EQ(p1.hash(), stable_projector(biorthonormalize(
                           unit_cols(3, 1), unit_cols(3, 1), w)).hash());
}

TEST(UnstableEigenspace, WeightedHopfPlantHasOnePair) {
  const HopfPde pde{HopfSpec{}};
  const NewtonReport nr = hopf_steady_state(pde, 0.01, 50);
  const StateSpaceSystem sys = pde.linearization(nr.x);
  const UnstablePair up = extract_unstable_pair(sys);
  ASSERT_EQ(up.pair.size(), 2);
  EXPECT_NEAR(up.right.ritz_values(0).real(), up.right.ritz_values(1).real(),
              1e-10);
  EXPECT_GT(std::abs(up.right.ritz_values(0).imag()), 0.1);
  EXPECT_LE(up.pair.biorthogonality_error(), 1e-10);
  const ComplexVector dense = eigenvalues(sys.A.matrix());
  EXPECT_NEAR(up.right.ritz_values(0).real(), dense(0).real(), 1e-6);
  EXPECT_LT(dense(2).real(), 0.0);
}

}  // namespace
}  // namespace ubpod
