#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <factorsde/error.hpp>
#include <factorsde/estimator.hpp>

#include "oracles.hpp"
#include "example_model.hpp"

namespace factorsde {
namespace {

using testing::example_params;
using testing::example_sigma;
using testing::example_theta;

RealisedCov exact_q(const Matrix& sigma, Index n, double h) {
  RealisedCov q;
  q.q = SymMatrix(sigma);
  q.n = n;
  q.h = h;
  return q;
}

ParamVector random_params(Index p, Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> v(0.5, 2.0);
  ParamVector params;
  params.a = Matrix(p - k, k);
  for (Index i = 0; i < params.a.size(); ++i) params.a.data()[i] = u(rng);
  params.sigma_ff = SymMatrix(testing::random_spd(k, rng));
  params.sigma_ee = Vector(p);
  for (Index i = 0; i < p; ++i) params.sigma_ee(i) = v(rng);
  return params;
}

TEST(RealisedCov, SumOfOuterProductsOverHorizon) {
  Matrix x(4, 2);
  x << 0, 0, 1, 2, 1, 1, 3, 1;
  const RealisedCov q = realised_cov(x, 0.5);
  Matrix expected = Matrix::Zero(2, 2);
  for (Index i = 1; i < 4; ++i) {
    const Vector d = (x.row(i) - x.row(i - 1)).transpose();
    expected += d * d.transpose();
  }
  expected /= 1.5;
  EXPECT_LT((q.q.matrix() - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(q.n, 3);
  EXPECT_DOUBLE_EQ(q.horizon(), 1.5);
  EXPECT_THROW(realised_cov(Matrix::Zero(1, 2), 0.5), Error);
}

TEST(RealisedCov, ConsistentForExampleCovariance) {
  const SamplePath path = simulate(testing::example_sim(200000, 5e-6, 31));
  const Matrix q = realised_cov(path).q.matrix();
  for (Index i = 0; i < 6; ++i) EXPECT_NEAR(q(i, i) / example_sigma()(i, i), 1.0, 0.02) << i;
}

TEST(Contrast, ZeroAtTrueStructure) {
  const RealisedCov q = exact_q(example_sigma(), 1000, 1e-3);
  EXPECT_NEAR(contrast(q, example_params()), 0.0, 1e-20);
  EXPECT_LT(contrast_grad(q, example_params()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Contrast, EqualsQuadraticFormInWeightInverse) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    const ParamVector params = random_params(6, 2, rng);
    const RealisedCov q = exact_q(testing::random_spd(6, rng, 1.0), 100, 0.01);
    const Matrix w = testing::reference_weight(sigma_of_theta(params).matrix());
    const Vector r = vech(q.q) - vech(sigma_of_theta(params));
    const double oracle = r.dot(w.ldlt().solve(r));
    EXPECT_NEAR(contrast(q, params), oracle, 1e-10 * (1.0 + oracle));
  }
}

TEST(ContrastGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(77);
  for (auto [p, k] : {std::pair<Index, Index>{3, 1}, {6, 2}}) {
    for (int t = 0; t < 10; ++t) {
      const ParamVector params = random_params(p, k, rng);
      const RealisedCov q = exact_q(testing::random_spd(p, rng, 1.0), 100, 0.01);
      const Vector g = contrast_grad(q, params);
      const Vector fd = testing::numeric_gradient(
          [&](const Vector& x) { return contrast(q, unpack(x, p, k)); }, pack(params));
      EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-6 * g.cwiseAbs().maxCoeff());
    }
  }
}

TEST(QuasiLikelihood, ClosedFormAtScaledCovariance) {
  // Sigma = 2 Q gives p (log 2 - 1/2).
  const ParamVector params = example_params();
  const RealisedCov q = exact_q(0.5 * example_sigma(), 1000, 1e-3);
  EXPECT_NEAR(quasi_loglik_excess(q, params), 6.0 * (std::log(2.0) - 0.5), 1e-12);
  const RealisedCov exact = exact_q(example_sigma(), 1000, 1e-3);
  EXPECT_NEAR(quasi_loglik_excess(exact, params), 0.0, 1e-12);
}

TEST(QuasiLikelihood, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const ParamVector params = random_params(6, 2, rng);
  const RealisedCov q = exact_q(testing::random_spd(6, rng, 1.0), 100, 0.01);
  const Vector g = quasi_loglik_grad(q, params);
  const Vector fd = testing::numeric_gradient(
      [&](const Vector& x) { return quasi_loglik_excess(q, unpack(x, 6, 2)); }, pack(params));
  EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-6 * g.cwiseAbs().maxCoeff());
}

TEST(Fit, RecoversTruthFromExactCovariance) {
  const RealisedCov q = exact_q(example_sigma(), 1000, 1e-3);
  for (Objective obj : {Objective::contrast, Objective::quasi_likelihood}) {
    FitOptions o;
    o.objective = obj;
    const FitResult f = fit(q, testing::example_spec(1000, 1e-3), std::nullopt, o);
    EXPECT_TRUE(f.converged) << f.message << " iterations " << f.iterations << " grad " << f.gradient_norm << " obj " << static_cast<int>(obj);
    EXPECT_LT((pack(f.theta_hat) - example_theta()).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_NEAR(f.contrast, 0.0, 1e-12);
    EXPECT_FALSE(f.heywood);
  }
}

TEST(Fit, FixedPilotWeighting) {
  const RealisedCov q = exact_q(example_sigma(), 1000, 1e-3);
  FitOptions o;
  o.weighting = Weighting::fixed_pilot;
  const FitResult f = fit(q, testing::example_spec(1000, 1e-3), std::nullopt, o);
  EXPECT_TRUE(f.converged) << f.message;
  EXPECT_LT((pack(f.theta_hat) - example_theta()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Fit, StandardErrorsFromAsymptoticVariance) {
  const RealisedCov q = exact_q(example_sigma(), 1000, 1e-3);
  const FitResult f = fit(q, testing::example_spec(1000, 1e-3), example_params());
  const CovStructure cs = cov_structure(f.theta_hat);
  const Matrix info = cs.delta.transpose() * testing::reference_weight(cs.sigma.matrix()).inverse() * cs.delta;
  const Matrix avar = info.inverse();
  EXPECT_LT((f.avar - avar).cwiseAbs().maxCoeff(), 1e-6 * avar.cwiseAbs().maxCoeff());
  for (Index j = 0; j < 17; ++j) {
    EXPECT_GT(f.se(j), 0.0);
    EXPECT_NEAR(f.se(j), std::sqrt(avar(j, j) / 1000.0), 1e-8);
  }
}

TEST(Fit, SimulatedDataWithinFiveStandardErrors) {
  const SamplePath path = simulate(testing::example_sim(100000, 1e-5, 12));
  const RealisedCov q = realised_cov(path);
  const FitResult f = fit(q, testing::example_spec(100000, 1e-5));
  ASSERT_TRUE(f.converged) << f.message;
  const Vector z = (pack(f.theta_hat) - example_theta()).cwiseQuotient(f.se);
  EXPECT_LT(z.cwiseAbs().maxCoeff(), 5.0);
}

TEST(Fit, Errors) {
  const RealisedCov q = exact_q(example_sigma(), 1000, 1e-3);
  ModelSpec spec = testing::example_spec(1000, 1e-3);
  spec.p = 5;
  EXPECT_THROW(fit(q, spec), Error);
  ParamVector outside = example_params();
  outside.sigma_ee(0) = -1.0;
  try {
    fit(q, testing::example_spec(1000, 1e-3), outside);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
  }
  FitOptions o;
  o.box = Box::unbounded(3);
  EXPECT_THROW(fit(q, testing::example_spec(1000, 1e-3), std::nullopt, o), Error);
}

TEST(Fit, NonConvergenceReturnsPartialResult) {
  const SamplePath path = simulate(testing::example_sim(1000, 1e-3, 3));
  FitOptions o;
  o.max_iter = 1;
  const FitResult f = fit(realised_cov(path), testing::example_spec(1000, 1e-3), std::nullopt, o);
  EXPECT_FALSE(f.converged);
  EXPECT_EQ(f.iterations, 1);
  EXPECT_EQ(pack(f.theta_hat).size(), 17);
}

TEST(Boxes, DefaultAndSymmetric) {
  const Box d = default_box(6, 2);
  EXPECT_EQ(d.size(), 17);
  EXPECT_DOUBLE_EQ(d.lower(16), 1e-8);
  EXPECT_TRUE(std::isinf(d.lower(0)));
  const Box s = symmetric_box(6, 2, 30.0);
  EXPECT_TRUE(s.contains(example_theta()));
}

TEST(DefaultInit, ExactForExactFactorStructure) {
  const RealisedCov q = exact_q(example_sigma(), 1000, 1e-3);
  const ParamVector init = default_init(q, 2);
  EXPECT_EQ(init.a.rows(), 4);
  EXPECT_EQ(init.a.cols(), 2);
  EXPECT_LT((sigma_of_theta(init).matrix() - example_sigma()).cwiseAbs().maxCoeff() / 794.0, 0.1);
}

}  // namespace
}  // namespace factorsde
