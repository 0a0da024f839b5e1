#include <cmath>

#include <gtest/gtest.h>

#include <factorsde/error.hpp>
#include <factorsde/estimator.hpp>
#include <factorsde/sde_sim.hpp>

#include "oracles.hpp"
#include "example_model.hpp"

namespace factorsde {
namespace {

using testing::example_sim;

TEST(Simulate, ShapeAndInitialState) {
  const SimConfig c = example_sim(100, 1e-3, 1);
  const SamplePath path = simulate(c);
  EXPECT_EQ(path.x.rows(), 101);
  EXPECT_EQ(path.x.cols(), 6);
  EXPECT_DOUBLE_EQ(path.h, 1e-3);
  const Vector x0 = loading_matrix(c.params) * c.f0 + c.e0;
  EXPECT_EQ(Vector(path.x.row(0).transpose()), x0);
  EXPECT_FALSE(path.f.has_value());
}

TEST(Simulate, DeterministicInSeed) {
  const SamplePath a = simulate(example_sim(500, 1e-3, 17));
  const SamplePath b = simulate(example_sim(500, 1e-3, 17));
  const SamplePath c = simulate(example_sim(500, 1e-3, 18));
  EXPECT_EQ(a.x, b.x);
  EXPECT_NE(a.x, c.x);
}

TEST(Simulate, ObservationsAreLoadedFactorsPlusUnique) {
  SimConfig c = example_sim(200, 1e-3, 4);
  c.retain_latents = true;
  const SamplePath path = simulate(c);
  ASSERT_TRUE(path.f && path.e);
  const Matrix rebuilt = *path.f * loading_matrix(c.params).transpose() + *path.e;
  EXPECT_LT((rebuilt - path.x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Simulate, FactorPathIndependentOfObservationDimension) {
  SimConfig big = example_sim(300, 1e-3, 21);
  big.retain_latents = true;
  ModelSpec spec = big.spec;
  spec.p = 4;
  std::vector<DriftSpec> unique(4, DriftSpec::scalar_ou(1.0, 0.0));
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  SimConfig small = make_sim_config(spec, a, big.factor_drift, big.factor_dispersion, unique,
                                    Vector::Ones(4), big.f0, Vector::Zero(4), 21);
  small.retain_latents = true;
  EXPECT_EQ(*simulate(big).f, *simulate(small).f);
}

TEST(Simulate, EulerAndExactAgreeOnRealisedCovariance) {
  SimConfig euler = example_sim(1000, 1e-3, 5);
  SimConfig exact = euler;
  exact.scheme = Scheme::exact_ou;
  const Matrix qe = realised_cov(simulate(euler)).q.matrix();
  const Matrix qx = realised_cov(simulate(exact)).q.matrix();
  EXPECT_LT((qe - qx).norm() / qe.norm(), 1e-2);
}

TEST(Simulate, SubstepsRefineTheSameGrid) {
  SimConfig c = example_sim(50, 1e-2, 2);
  c.substeps = 10;
  const SamplePath path = simulate(c);
  EXPECT_EQ(path.x.rows(), 51);
  EXPECT_DOUBLE_EQ(path.h, 1e-2);
}

TEST(Simulate, ZeroUniqueDispersionGivesConstantPath) {
  ModelSpec spec;
  spec.p = 2;
  spec.k = 1;
  spec.n = 100;
  spec.h = 0.01;
  const SimConfig c = make_sim_config(spec, Matrix::Constant(1, 1, 2.0), DriftSpec::scalar_ou(0.0, 0.0),
                                      Matrix::Zero(1, 1), {DriftSpec::scalar_ou(0.0, 0.0), DriftSpec::scalar_ou(0.0, 0.0)},
                                      Vector::Zero(2), Vector::Constant(1, 1.0), Vector::Zero(2), 3);
  const SamplePath path = simulate(c);
  EXPECT_EQ(path.x.col(0), Vector::Constant(101, 1.0));
  EXPECT_EQ(path.x.col(1), Vector::Constant(101, 2.0));
}

TEST(Simulate, StationaryVarianceOfExactOu) {
  ModelSpec spec;
  spec.p = 2;
  spec.k = 1;
  spec.n = 200000;
  spec.h = 0.1;
  SimConfig c = make_sim_config(spec, Matrix::Zero(1, 1), DriftSpec::scalar_ou(2.0, 0.0), Matrix::Ones(1, 1),
                                {DriftSpec::scalar_ou(1.0, 0.0), DriftSpec::scalar_ou(1.0, 0.0)},
                                Vector::Ones(2), Vector::Zero(1), Vector::Zero(2), 9);
  c.scheme = Scheme::exact_ou;
  c.retain_latents = true;
  const Vector f = simulate(c).f->col(0);
  const double mean = f.mean();
  const double var = (f.array() - mean).square().mean();
  EXPECT_NEAR(var, 0.25, 0.01);
}

TEST(Simulate, DivergenceReported) {
  SimConfig c = example_sim(1000, 0.5, 1);
  c.factor_drift = DriftSpec::custom([](const Vector& x) -> Vector { return x.array().square() * 10.0; }, 0.0, "blowup");
  try {
    simulate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::simulation_diverged);
  }
}

TEST(SimConfig, ValidateChecksDispersionAgainstParams) {
  SimConfig c = example_sim(10, 1e-3, 1);
  c.factor_dispersion(0, 0) = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = example_sim(10, 1e-3, 1);
  c.scheme = Scheme::exact_ou;
  c.factor_drift = DriftSpec::custom([](const Vector& x) -> Vector { return -x; }, 1.0, "linear");
  EXPECT_THROW(c.validate(), Error);
  c = example_sim(10, 1e-3, 1);
  c.substeps = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(OuTransition, MatchesQuadratureOracle) {
  Matrix b(2, 2);
  b << 0.5, 0.3, 0.2, 0.4;
  const Vector mu = (Vector(2) << 2, 4).finished();
  const Matrix s = testing::example_s();
  const double h = 0.7;
  const OuTransition t(b, mu, s, h);
  EXPECT_LT((t.decay() - testing::reference_expm(-b * h)).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix integral =
      testing::simpson([&](double u) { return testing::reference_expm(-b * u); }, h);
  EXPECT_LT((t.offset() - integral * mu).cwiseAbs().maxCoeff(), 1e-10);
  const Matrix cov = testing::simpson(
      [&](double u) {
        const Matrix e = testing::reference_expm(-b * u);
        return Matrix(e * s * s.transpose() * e.transpose());
      },
      h);
  EXPECT_LT((t.covariance() - cov).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((t.noise_factor() * t.noise_factor().transpose() - t.covariance()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OuTransition, SingularDriftIsBrownianWithDrift) {
  const Matrix b = Matrix::Zero(2, 2);
  const Vector mu = (Vector(2) << 1, -1).finished();
  const Matrix s = testing::example_s();
  const OuTransition t(b, mu, s, 0.25);
  EXPECT_LT((t.decay() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((t.offset() - 0.25 * mu).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((t.noise_factor() - 0.5 * s).cwiseAbs().maxCoeff(), 1e-12);
  const Vector z = (Vector(2) << 0.3, -1.2).finished();
  const Vector x = (Vector(2) << 1, 2).finished();
  EXPECT_LT((exact_ou_step(x, b, mu, s, 0.25, z) - t.step(x, z)).cwiseAbs().maxCoeff(), 1e-14);
}

}  // namespace
}  // namespace factorsde
