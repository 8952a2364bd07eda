#include "ptss/operators.hpp"

#include "test_util.hpp"

namespace ptss {
namespace {

TEST(DenseOperator, MatvecMatchesMatrixProduct) {
  RngStream rng(1);
  const Matrix a = testing::random_spd(12, 50.0, rng);
  const DenseOperator op(a);
  const Vector v = standard_normal_vector(12, rng);
  EXPECT_LT((op.matvec(v) - a * v).norm(), 1e-12 * (a * v).norm());
}

TEST(DenseOperator, RejectsDimensionMismatch) {
  const DenseOperator op = DenseOperator::identity(4);
  EXPECT_THROW(op.matvec(Vector::Ones(3)), DimensionError);
  EXPECT_THROW(DenseOperator(Matrix::Zero(3, 4)), Error);
}

TEST(DenseOperator, DiagonalFactory) {
  const Vector d = Vector::LinSpaced(5, 1.0, 5.0);
  const DenseOperator op = DenseOperator::diagonal(d);
  EXPECT_EQ((op.matvec(Vector::Ones(5)) - d).norm(), 0.0);
}

TEST(DenseCholeskyOracle, DiagonalSystem) {
  // diag(1, 2, 4): log|A| = 3 log 2, A^{-1} 1 = (1, 1/2, 1/4), quad = 1.75.
  Vector d(3);
  d << 1.0, 2.0, 4.0;
  const auto r = dense_cholesky_oracle(d.asDiagonal().toDenseMatrix(), Vector::Ones(3));
  EXPECT_NEAR(r.logdet, 3.0 * std::log(2.0), 1e-14);
  EXPECT_NEAR(r.quad_form, 1.75, 1e-14);
  EXPECT_NEAR(r.solution[2], 0.25, 1e-15);
}

TEST(DenseCholeskyOracle, MatchesEigendecomposition) {
  RngStream rng(2);
  const Matrix a = testing::random_spd(20, 1e3, rng);
  const Vector y = standard_normal_vector(20, rng);
  const auto r = dense_cholesky_oracle(a, y);
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  EXPECT_NEAR(r.logdet, es.eigenvalues().array().log().sum(), 1e-10);
  EXPECT_LT(testing::rel_err(a * r.solution, y), 1e-10);
  EXPECT_NEAR(r.quad_form, y.dot(r.solution), 1e-10 * std::abs(r.quad_form));
}

TEST(DenseCholeskyOracle, ReportsFailingPivot) {
  Matrix a = Matrix::Identity(4, 4);
  a(2, 2) = -1.0;
  try {
    dense_cholesky_factor(a);
    FAIL() << "expected NotSpdError";
  } catch (const NotSpdError& e) {
    EXPECT_EQ(e.index(), 2);
  }
}

TEST(DenseCholeskyOracle, EnforcesSizeCap) {
  EXPECT_THROW(dense_cholesky_oracle(Matrix::Identity(8, 8), Vector::Ones(8), 4), Error);
}

TEST(ConditionNumber, KnownSpectrum) {
  RngStream rng(3);
  EXPECT_NEAR(condition_number_dense(testing::random_spd(16, 250.0, rng)), 250.0, 1e-8);
}

TEST(SplitPreconditionedOperator, IdentityPreconditionerIsNoOp) {
  struct Scaled final : Preconditioner {
    Eigen::Index dim() const override { return 6; }
    Vector apply_inverse(const Vector& v) const override { return v / 4.0; }
    Vector apply_inverse_sqrt(const Vector& v) const override { return v / 2.0; }
    double logdet() const override { return 6.0 * std::log(4.0); }
  } m;
  RngStream rng(4);
  const Matrix a = testing::random_spd(6, 10.0, rng);
  const DenseOperator op(a);
  const SplitPreconditionedOperator s(op, m);
  const Vector v = standard_normal_vector(6, rng);
  EXPECT_LT((s.matvec(v) - a * v / 4.0).norm(), 1e-13);
}

}  // namespace
}  // namespace ptss
