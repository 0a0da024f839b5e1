#pragma once

#include <functional>
#include <optional>
#include <string>

#include "factorsde/matrixcalc.hpp"

namespace factorsde {

/// Axis-aligned box; infinite bounds are allowed.
struct Box {
  Vector lower;
  Vector upper;

  static Box unbounded(Index n);
  Index size() const noexcept { return lower.size(); }
  bool contains(const Vector& x) const;
  Vector project(const Vector& x) const;
};

struct MinimizeOptions {
  double grad_tol = 1e-8;  ///< converged when |projected gradient|_inf <= grad_tol (1 + |f|)
  double step_tol = 1e-12;
  int max_iter = 500;
};

struct MinimizeResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

/// Returns f(x) and fills *grad, or std::nullopt when x is infeasible
/// (for example, the weight matrix is not positive definite there).
using ObjectiveFn = std::function<std::optional<double>(const Vector& x, Vector* grad)>;

/// Projected BFGS with Armijo backtracking along the projected path.
/// Variables sitting on a bound with the gradient pointing outward are held
/// fixed for the step. Infeasible trial points are treated as failed Armijo
/// tests and backtracked. `initial_inverse_hessian`, when given, seeds the
/// quasi-Newton matrix and is reused on restarts.
///
/// Throws ErrorCode::fit_failed when the start point is infeasible or no
/// feasible point can be found along a descent direction.
MinimizeResult minimize_projected_bfgs(const ObjectiveFn& objective, const Vector& x0,
                                       const Box& box, const MinimizeOptions& options,
                                       const std::optional<Matrix>& initial_inverse_hessian = {});

}  // namespace factorsde
