#include "factorsde/optimizer.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "factorsde/error.hpp"

namespace factorsde {

Box Box::unbounded(Index n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
}

bool Box::contains(const Vector& x) const {
  return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
}

Vector Box::project(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

namespace {

double projected_gradient_norm(const Vector& x, const Vector& g, const Box& box) {
  return (x - box.project(x - g)).lpNorm<Eigen::Infinity>();
}

// Variables held at a bound for this step.
Eigen::Array<bool, Eigen::Dynamic, 1> active_set(const Vector& x, const Vector& g, const Box& box) {
  return ((x.array() <= box.lower.array()) && (g.array() > 0.0)) ||
         ((x.array() >= box.upper.array()) && (g.array() < 0.0));
}

}  // namespace

MinimizeResult minimize_projected_bfgs(const ObjectiveFn& objective, const Vector& x0,
                                       const Box& box, const MinimizeOptions& options,
                                       const std::optional<Matrix>& initial_inverse_hessian) {
  const Index n = x0.size();
  if (box.size() != n) throw Error(ErrorCode::dimension_mismatch, "minimize: box size mismatch");

  MinimizeResult res;
  res.x = box.project(x0);
  res.gradient.resize(n);
  auto f0 = objective(res.x, &res.gradient);
  if (!f0 || !std::isfinite(*f0) || !res.gradient.allFinite()) {
    throw Error(ErrorCode::fit_failed, "minimize: objective undefined at the starting point");
  }
  res.value = *f0;

  const Matrix h_init = initial_inverse_hessian.value_or(Matrix::Identity(n, n));
  Matrix h_inv = h_init;
  bool fresh = true;

  Vector g_new(n);
  for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
    res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, box);
    if (res.projected_gradient_norm <= options.grad_tol * (1.0 + std::abs(res.value))) {
      res.converged = true;
      res.message = "projected gradient below tolerance";
      return res;
    }

    const auto active = active_set(res.x, res.gradient, box);
    Vector g_free = res.gradient;
    for (Index i = 0; i < n; ++i) {
      if (active(i)) g_free(i) = 0.0;
    }
    Matrix h_free = h_inv;
    for (Index i = 0; i < n; ++i) {
      if (active(i)) {
        h_free.row(i).setZero();
        h_free.col(i).setZero();
      }
    }
    Vector d = -h_free * g_free;
    if (!(res.gradient.dot(d) < 0.0)) {
      h_inv = h_init;
      fresh = true;
      d = -g_free;
    }

    // Backtracking along the projected path.
    double alpha = 1.0;
    bool accepted = false;
    int infeasible = 0;
    Vector x_new;
    double f_new = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
      x_new = box.project(res.x + alpha * d);
      const auto f_try = objective(x_new, &g_new);
      if (!f_try) ++infeasible;
      if (f_try && std::isfinite(*f_try) && g_new.allFinite() &&
          *f_try <= res.value + 1e-4 * res.gradient.dot(x_new - res.x)) {
        f_new = *f_try;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        h_inv = h_init;
        fresh = true;
        continue;
      }
      if (infeasible == 60) {
        throw Error(ErrorCode::fit_failed,
                    "minimize: every trial point infeasible at iteration " +
                        std::to_string(res.iterations) + " (objective value " +
                        std::to_string(res.value) + ")");
      }
      res.message = "line search failed";
      res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, box);
      return res;
    }

    const bool fresh_before_step = fresh;
    const Vector s = x_new - res.x;
    const Vector y = g_new - res.gradient;
    res.x = x_new;
    res.value = f_new;
    res.gradient = g_new;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Vector hy = h_inv * y;
      // H+ = (I - rho s y') H (I - rho y s') + rho s s'
      h_inv += rho * ((1.0 + rho * y.dot(hy)) * (s * s.transpose()) -
                      (hy * s.transpose() + s * hy.transpose()));
      fresh = false;
    }

    if (s.lpNorm<Eigen::Infinity>() <= options.step_tol * (1.0 + res.x.lpNorm<Eigen::Infinity>())) {
      res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, box);
      res.converged = res.projected_gradient_norm <= options.grad_tol * (1.0 + std::abs(res.value));
      if (!res.converged && !fresh_before_step) {
        h_inv = h_init;
        fresh = true;
        continue;
      }
      res.message = res.converged ? "projected gradient below tolerance" : "step below tolerance";
      ++res.iterations;
      return res;
    }
  }
  res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, box);
  res.converged = res.projected_gradient_norm <= options.grad_tol * (1.0 + std::abs(res.value));
  res.message = res.converged ? "projected gradient below tolerance" : "iteration limit reached";
  return res;
}

}  // namespace factorsde
