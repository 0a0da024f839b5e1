#pragma once

// Covariance structure of the latent factor model
//
//   X_t = Lambda f_t + e_t,   Lambda = (I_k, A')',
//   Sigma(theta) = Lambda Sigma_ff Lambda' + Diag(sigma_1^2, ..., sigma_p^2),
//
// with packed parameter theta = (vec A, vech Sigma_ff, sigma_1^2, ..., sigma_p^2).

#include <vector>

#include "factorsde/matrixcalc.hpp"

namespace factorsde {

enum class Regime { ergodic, non_ergodic };

const char* to_string(Regime r) noexcept;
Regime regime_from_string(const std::string& s);

/// Number of free parameters: (p - k) k + k (k + 1) / 2 + p.
constexpr Index param_count(Index p, Index k) noexcept {
  return (p - k) * k + sym_size(k) + p;
}

/// p(p+1)/2 - q_k. Negative or zero means the k-factor model cannot be tested.
constexpr Index degrees_of_freedom(Index p, Index k) noexcept {
  return sym_size(p) - param_count(p, k);
}

struct ModelSpec {
  Index p = 0;
  Index k = 0;
  Regime regime = Regime::ergodic;
  Index n = 0;     ///< number of increments
  double h = 0.0;  ///< sampling step, time units

  Index q() const noexcept { return param_count(p, k); }
  Index df() const noexcept { return degrees_of_freedom(p, k); }
  bool testable() const noexcept { return df() >= 1; }
  double horizon() const noexcept { return static_cast<double>(n) * h; }

  /// Throws ErrorCode::invalid_argument unless 1 <= k < p, n >= 0, h >= 0.
  void validate() const;
};

struct ParamVector {
  Matrix a;          ///< (p - k) x k free loadings
  SymMatrix sigma_ff;  ///< k x k factor covariance
  Vector sigma_ee;   ///< p unique variances

  Index p() const noexcept { return sigma_ee.size(); }
  Index k() const noexcept { return sigma_ff.dim(); }
  Index q() const noexcept { return param_count(p(), k()); }

  /// Throws ErrorCode::dimension_mismatch when the blocks disagree.
  void check_shapes() const;
};

Vector pack(const ParamVector& params);
ParamVector unpack(const Vector& theta, Index p, Index k);

/// Lambda = (I_k; A), p x k.
Matrix loading_matrix(const ParamVector& params);

SymMatrix sigma_of_theta(const ParamVector& params);

/// W(Sigma) = 2 D_p^+ (Sigma (x) Sigma) D_p^+', assembled from the entry
/// formula W[(i,j),(k,l)] = s_ik s_jl + s_il s_jk over vech positions.
/// Throws ErrorCode::not_positive_definite when Sigma is not PD.
SymMatrix weight_matrix(const SymMatrix& sigma);

/// dSigma/dtheta_j for every packed coordinate j, as p x p matrices.
std::vector<Matrix> sigma_derivatives(const ParamVector& params);

/// Delta = d vech Sigma(theta) / d theta', p(p+1)/2 x q_k.
Matrix delta_jacobian(const ParamVector& params);

/// Cholesky factorisation of a weight matrix. Construction fails with
/// ErrorCode::not_positive_definite when a pivot drops below 1e-12 * trace.
class WeightFactor {
 public:
  explicit WeightFactor(const SymMatrix& w);

  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
  Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }

 private:
  Eigen::LLT<Matrix> llt_;
};

struct CovStructure {
  SymMatrix sigma;
  SymMatrix w;
  Matrix delta;
};

CovStructure cov_structure(const ParamVector& params);

/// Smallest eigenvalue of Sigma_ff; negative values flag a Heywood-type fit.
double min_factor_eigenvalue(const ParamVector& params);

}  // namespace factorsde
