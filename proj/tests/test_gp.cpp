#include "ptss/gp.hpp"

#include "test_util.hpp"

#include <numbers>

namespace ptss {
namespace {

GpModel small_model(Eigen::Index n, KernelFamily fam, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset d = testing::random_cube(n, 2, 3.0, rng);
  KernelSpec spec{fam, 1.3, 0.8, 0.15};
  Vector y = standard_normal_vector(n, rng);
  return GpModel(std::move(d), std::move(y), spec);
}

TEST(Nlml, SinglePointClosedForm) {
  Matrix x(1, 1);
  x << 0.3;
  Vector y(1);
  y << 2.0;
  const GpModel m(Dataset(x), y, KernelSpec{KernelFamily::Rbf, 2.0, 1.0, 0.5});
  const double k = 4.0 * 1.5;
  const double expected = 0.5 * (4.0 / k + std::log(k) + std::log(2.0 * std::numbers::pi));
  EXPECT_NEAR(nlml_exact(m).value, expected, 1e-14);
  // d/df of 0.5 (y^2 / (f^2 c) + log(f^2 c)) = -y^2 / (f^3 c) + 1 / f.
  EXPECT_NEAR(nlml_grad_exact(m)[Hyper::F], -4.0 / (8.0 * 1.5) + 0.5, 1e-14);
}

TEST(Nlml, ValueAndGradientPathsAgree) {
  const GpModel m = small_model(30, KernelFamily::Rbf, 71);
  const NlmlExact both = nlml_exact_with_grad(m);
  EXPECT_NEAR(both.value, nlml_exact(m).value, 1e-10 * std::abs(both.value));
  const NlmlGradient g = nlml_grad_exact(m);
  for (Hyper h : kAllHypers) EXPECT_EQ(both.grad[h], g[h]);
}

TEST(Nlml, GradientMatchesCentralDifferences) {
  for (KernelFamily fam : {KernelFamily::Rbf, KernelFamily::Matern32}) {
    const GpModel m = small_model(40, fam, 72);
    const NlmlGradient g = nlml_grad_exact(m);
    for (Hyper h : kAllHypers) {
      const double eps = 1e-5 * m.spec.get(h);
      GpModel up = m, dn = m;
      up.spec.set(h, m.spec.get(h) + eps);
      dn.spec.set(h, m.spec.get(h) - eps);
      const double fd = (nlml_exact(up).value - nlml_exact(dn).value) / (2.0 * eps);
      EXPECT_NEAR(g[h], fd, 1e-6 * std::max(1.0, std::abs(fd))) << to_string(fam) << " " << to_string(h);
    }
  }
}

TEST(Nlml, ModelValidation) {
  RngStream rng(1);
  EXPECT_THROW(GpModel(testing::random_cube(5, 2, 1.0, rng), Vector::Zero(4), KernelSpec{}), DimensionError);
  KernelSpec bad;
  bad.f = -1.0;
  EXPECT_THROW(GpModel(testing::random_cube(5, 2, 1.0, rng), Vector::Zero(5), bad), Error);
  const GpModel m = small_model(10, KernelFamily::Rbf, 2);
  EXPECT_THROW(nlml_exact(m, 5), Error);
}

TEST(NlmlEstimate, FullLengthTruncationReproducesQuadraticTerm) {
  const GpModel m = small_model(30, KernelFamily::Matern32, 73);
  EstimatorConfig cfg;
  cfg.solver = Truncated{30};
  RngStream rng(1);
  const NlmlEstimate e = nlml_estimate_full(m, cfg, rng, true, true);
  const DenseOracleResult o = dense_cholesky_oracle(gram_matrix(m.spec, m.data).matrix(), m.labels);
  EXPECT_NEAR(e.quad_form, o.quad_form, 1e-8 * o.quad_form);
}

TEST(NlmlEstimate, AveragesConvergeToExact) {
  for (Eigen::Index rank : {Eigen::Index{0}, Eigen::Index{8}}) {
    const GpModel m = small_model(30, KernelFamily::Rbf, 74);
    EstimatorConfig cfg;
    cfg.solver = Truncated{30};
    cfg.k_z = 400;
    cfg.precond_rank = rank;
    RngStream rng(2);
    const NlmlEstimate e = nlml_estimate_full(m, cfg, rng, true, true);
    const NlmlExact ex = nlml_exact_with_grad(m);
    EXPECT_NEAR(e.value, ex.value, 0.03 * std::abs(ex.value) + 0.5);
    for (Hyper h : kAllHypers) EXPECT_NEAR(e.grad[h], ex.grad[h], 0.1 * std::abs(ex.grad[h]) + 1.0) << to_string(h);
  }
}

TEST(NlmlEstimate, TssRunsWithPreconditioner) {
  const GpModel m = small_model(40, KernelFamily::Rbf, 75);
  EstimatorConfig cfg;
  cfg.solver = Tss{make_exponential(0.5, 5, 15)};
  cfg.precond_rank = 10;
  RngStream rng(3);
  const NlmlEstimate e = nlml_estimate_full(m, cfg, rng, true, true);
  EXPECT_TRUE(std::isfinite(e.value));
  for (Hyper h : kAllHypers) EXPECT_TRUE(std::isfinite(e.grad[h]));
}

TEST(NlmlEstimate, SystemPreconditionerUsesShift) {
  const GpModel m = small_model(20, KernelFamily::Rbf, 76);
  const GpSystem sys = build_gp_system(m, 5);
  ASSERT_TRUE(sys.precond.has_value());
  EXPECT_DOUBLE_EQ(sys.precond->eta(), m.spec.f * m.spec.f * m.spec.mu);
  EXPECT_FALSE(build_gp_system(m, 0).precond.has_value());
}

TEST(PriorSampling, EmpiricalCovarianceMatchesKernel) {
  Matrix x(3, 1);
  x << 0.0, 0.5, 2.0;
  const Dataset d(x);
  const KernelSpec spec{KernelFamily::Rbf, 1.0, 1.0, 0.1};
  const Matrix k = gram_matrix(spec, d).matrix();
  RngStream rng(77);
  Matrix acc = Matrix::Zero(3, 3);
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    const Vector y = sample_labels_from_prior(spec, d, rng);
    acc += y * y.transpose();
  }
  acc /= reps;
  EXPECT_LT((acc - k).cwiseAbs().maxCoeff(), 0.05);
}

}  // namespace
}  // namespace ptss
