#pragma once

// Goodness-of-fit test for the number of factors and the sequential
// selection procedure built on it.
//
//   T = n * F(theta_hat),  T ~ chi2 with p(p+1)/2 - q_k degrees of freedom under H0.

#include <optional>
#include <string>
#include <vector>

#include "factorsde/estimator.hpp"

namespace factorsde {

struct TestOptions {
  FitOptions fit;
  /// Replaces p(p+1)/2 - q_k; exposed for replicating published tables whose
  /// degrees of freedom differ from the formula.
  std::optional<Index> df_override;
};

struct TestResult {
  Index k_star = 0;
  double statistic = 0.0;
  Index df = 0;
  double alpha = 0.05;
  double critical = 0.0;
  double p_value = 1.0;
  bool reject = false;
  FitResult fit;
  /// Set when the fit threw; statistic and p_value are then NaN and the
  /// entry counts as a rejection in sequential selection.
  std::optional<std::string> failure;
};

/// Fits the k_star-factor model and evaluates the statistic. Throws
/// ErrorCode::untestable when the degrees of freedom are below 1. A fit that
/// does not converge is still reported; check fit.converged.
TestResult test_k(const RealisedCov& q, const ModelSpec& spec, Index k_star, double alpha = 0.05,
                  const std::optional<ParamVector>& init = {}, const TestOptions& options = {});

struct SelectionResult {
  std::optional<Index> chosen_k;  ///< empty: every testable k rejected
  std::vector<TestResult> trail;
};

/// Tests k = 1, 2, ... while the degrees of freedom stay >= 1 and stops at
/// the first non-rejection. Every fit starts from default_init. Fit
/// failures are recorded in the trail and treated as rejections.
SelectionResult select_k(const RealisedCov& q, const ModelSpec& spec, double alpha = 0.05,
                         const TestOptions& options = {});

}  // namespace factorsde
