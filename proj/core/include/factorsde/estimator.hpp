#pragma once

// Realised covariance and the minimum-contrast estimator
//
//   Q_XX = (1/T) sum_i dX_i dX_i',  T = n h
//   F(theta) = r' W(Sigma(theta))^{-1} r,  r = vech Q_XX - vech Sigma(theta)
//
// with asymptotic covariance (Delta' W^{-1} Delta)^{-1} of sqrt(n)(theta_hat - theta).

#include <optional>
#include <string>

#include "factorsde/model.hpp"
#include "factorsde/optimizer.hpp"
#include "factorsde/sde_sim.hpp"

namespace factorsde {

struct RealisedCov {
  SymMatrix q;
  Index n = 0;
  double h = 0.0;

  Index dim() const noexcept { return q.dim(); }
  double horizon() const noexcept { return static_cast<double>(n) * h; }
};

/// Throws ErrorCode::invalid_argument for fewer than 2 observations.
RealisedCov realised_cov(const SamplePath& path);
RealisedCov realised_cov(const Matrix& observations, double h);

double contrast(const RealisedCov& q, const ParamVector& params);

/// Analytic gradient of the contrast in the packed coordinates:
///   dF/dtheta_j = -2 delta_j' u - u' (dW/dtheta_j) u,   u = W^{-1} r,
/// where the second term is evaluated as 4 <M Sigma M, dSigma_j> with M the
/// symmetric matrix satisfying D_p^+' u = vec M.
Vector contrast_grad(const RealisedCov& q, const ParamVector& params);

/// log det Sigma - log det Q + tr(Sigma^{-1} Q) - p. Requires Q PD.
double quasi_loglik_excess(const RealisedCov& q, const ParamVector& params);
Vector quasi_loglik_grad(const RealisedCov& q, const ParamVector& params);

enum class Objective { contrast, quasi_likelihood };

enum class Weighting {
  iterated,     ///< W(Sigma(theta)) recomputed at every iterate
  fixed_pilot,  ///< W(Q_XX) held fixed; Gauss-Newton iterations
};

/// Lower bound 1e-8 on every unique variance, everything else unbounded.
Box default_box(Index p, Index k);
/// [-bound, bound] on every coordinate.
Box symmetric_box(Index p, Index k, double bound);

struct FitOptions {
  double grad_tol = 1e-8;
  double step_tol = 1e-12;
  int max_iter = 500;
  std::optional<Box> box;  ///< explicit box; must have length q
  /// symmetric_box(p, k, bound) sized for each fit; used when box is empty.
  std::optional<double> box_bound;
  Objective objective = Objective::contrast;
  Weighting weighting = Weighting::iterated;
};

struct FitResult {
  ParamVector theta_hat;
  double contrast = 0.0;         ///< F at theta_hat
  double objective_value = 0.0;  ///< value of the minimised objective
  Matrix avar;                   ///< (Delta' W^{-1} Delta)^{-1}; NaN when singular
  Vector se;                     ///< sqrt(avar_ii / n)
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  ///< projected-gradient infinity norm
  std::string message;
  Index n = 0;
  double min_factor_eigenvalue = 0.0;
  bool heywood = false;  ///< Sigma_ff has a negative eigenvalue or some sigma_i^2 <= 0
};

/// Principal-axis factoring of Q rotated to Lambda = (I_k; A). Falls back to
/// A = 0, Sigma_ff = diag(Q_11..Q_kk), sigma_i^2 = Q_ii / 2 when the leading
/// k x k loading block is singular.
ParamVector default_init(const RealisedCov& q, Index k);

/// Minimises the selected objective over the box, starting from init or from
/// default_init projected onto the box. Non-convergence returns
/// the partial result with converged == false. Throws
/// ErrorCode::dimension_mismatch when spec.p != q.dim(), and
/// ErrorCode::invalid_argument when init lies outside the box.
FitResult fit(const RealisedCov& q, const ModelSpec& spec,
              const std::optional<ParamVector>& init = {}, const FitOptions& options = {});

}  // namespace factorsde
