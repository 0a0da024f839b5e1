#include <cmath>

#include <gtest/gtest.h>

#include <factorsde/error.hpp>
#include <factorsde/optimizer.hpp>

namespace factorsde {
namespace {

std::optional<double> rosenbrock(const Vector& x, Vector* g) {
  const double a = 1.0 - x(0);
  const double b = x(1) - x(0) * x(0);
  if (g) {
    (*g)(0) = -2.0 * a - 400.0 * x(0) * b;
    (*g)(1) = 200.0 * b;
  }
  return a * a + 100.0 * b * b;
}

TEST(Bfgs, Rosenbrock) {
  MinimizeOptions o;
  o.max_iter = 2000;
  const auto r = minimize_projected_bfgs(rosenbrock, (Vector(2) << -1.2, 1.0).finished(), Box::unbounded(2), o);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.x(0), 1.0, 1e-6);
  EXPECT_NEAR(r.x(1), 1.0, 1e-6);
}

TEST(Bfgs, ActiveBound) {
  // min (x - 3)^2 + (y + 1)^2 over [0, 2] x [0, 2] -> (2, 0)
  auto f = [](const Vector& x, Vector* g) -> std::optional<double> {
    if (g) *g = (Vector(2) << 2.0 * (x(0) - 3.0), 2.0 * (x(1) + 1.0)).finished();
    return (x(0) - 3.0) * (x(0) - 3.0) + (x(1) + 1.0) * (x(1) + 1.0);
  };
  const Box box{Vector::Zero(2), Vector::Constant(2, 2.0)};
  const auto r = minimize_projected_bfgs(f, (Vector(2) << 1.0, 1.0).finished(), box, {});
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_DOUBLE_EQ(r.x(0), 2.0);
  EXPECT_DOUBLE_EQ(r.x(1), 0.0);
}

TEST(Bfgs, InfeasibleRegionIsAvoided) {
  // log barrier at x > 0 with minimum at x = 1
  auto f = [](const Vector& x, Vector* g) -> std::optional<double> {
    if (x(0) <= 0.0) return std::nullopt;
    if (g) (*g)(0) = 1.0 - 1.0 / x(0);
    return x(0) - std::log(x(0));
  };
  const auto r = minimize_projected_bfgs(f, Vector::Constant(1, 20.0), Box::unbounded(1), {});
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.x(0), 1.0, 1e-7);
}

TEST(Bfgs, UndefinedStartThrows) {
  auto f = [](const Vector&, Vector*) -> std::optional<double> { return std::nullopt; };
  try {
    minimize_projected_bfgs(f, Vector::Zero(1), Box::unbounded(1), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::fit_failed);
  }
}

TEST(Bfgs, IterationLimitReported) {
  MinimizeOptions o;
  o.max_iter = 3;
  const auto r = minimize_projected_bfgs(rosenbrock, (Vector(2) << -1.2, 1.0).finished(), Box::unbounded(2), o);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_EQ(r.message, "iteration limit reached");
}

TEST(Box, ProjectAndContains) {
  const Box box{Vector::Zero(2), Vector::Ones(2)};
  EXPECT_TRUE(box.contains((Vector(2) << 0.5, 1.0).finished()));
  EXPECT_FALSE(box.contains((Vector(2) << 1.5, 0.0).finished()));
  EXPECT_EQ(box.project((Vector(2) << 1.5, -2.0).finished()), (Vector(2) << 1.0, 0.0).finished());
}

}  // namespace
}  // namespace factorsde
