#pragma once

// Simulation of the latent system
//
//   df_t   = b(f_t) dt + S dW_t,          f_0 = c_1   (k-dim, W r-dim)
//   de^i_t = B_i(e^i_t) dt + sigma_i dB^i_t, e_0 = c_2 (i = 1..p)
//   X_t    = Lambda f_t + e_t
//
// observed on the grid t_i = i h, i = 0..n.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "factorsde/model.hpp"

namespace factorsde {

/// Linear Ornstein-Uhlenbeck drift -(B x - mu).
struct LinearDrift {
  Matrix b;
  Vector mu;
};

/// User-supplied drift. The Lipschitz constant is recorded, not verified.
struct CustomDrift {
  std::function<Vector(const Vector&)> fn;
  double lipschitz = 0.0;
  std::string name;
};

class DriftSpec {
 public:
  DriftSpec() = default;

  static DriftSpec linear_ou(Matrix b, Vector mu);
  static DriftSpec scalar_ou(double b, double mu);
  static DriftSpec custom(std::function<Vector(const Vector&)> fn, double lipschitz,
                          std::string name);

  bool is_linear() const noexcept { return std::holds_alternative<LinearDrift>(kind_); }
  const LinearDrift& linear() const { return std::get<LinearDrift>(kind_); }
  const CustomDrift& custom() const { return std::get<CustomDrift>(kind_); }

  /// Dimension of a linear drift; -1 for custom drifts.
  Index dim() const noexcept;

  Vector evaluate(const Vector& x) const;

 private:
  std::variant<LinearDrift, CustomDrift> kind_;
};

enum class Scheme {
  euler,     ///< Euler-Maruyama with `substeps` steps per observation interval
  exact_ou,  ///< exact Gaussian OU transition; consumes the same normals as euler
};

struct SimConfig {
  ModelSpec spec;
  ParamVector params;  ///< generating parameters; A gives Lambda
  DriftSpec factor_drift;
  Matrix factor_dispersion;  ///< S, k x r
  std::vector<DriftSpec> unique_drifts;
  Vector unique_dispersions;  ///< sigma_i >= 0 (standard deviation units)
  Vector f0;
  Vector e0;
  std::uint64_t seed = 0;
  int substeps = 1;
  Scheme scheme = Scheme::euler;
  bool retain_latents = false;

  /// Shapes, S S' == Sigma_ff and sigma_i^2 == params.sigma_ee (relative 1e-9),
  /// substeps >= 1, linear drifts when scheme == exact_ou.
  void validate() const;
};

/// Builds a SimConfig whose `params` are derived from A, S S' and sigma^2.
SimConfig make_sim_config(const ModelSpec& spec, const Matrix& a, DriftSpec factor_drift,
                          const Matrix& s, std::vector<DriftSpec> unique_drifts,
                          const Vector& sigmas, const Vector& f0, const Vector& e0,
                          std::uint64_t seed);

struct SamplePath {
  double h = 0.0;
  Matrix x;                ///< (n+1) x p
  std::optional<Matrix> f;  ///< (n+1) x k when latents are retained
  std::optional<Matrix> e;  ///< (n+1) x p when latents are retained

  Index n() const noexcept { return x.rows() - 1; }
  Index dim() const noexcept { return x.cols(); }
  double time(Index i) const noexcept { return static_cast<double>(i) * h; }
};

/// Deterministic in config.seed. Factor noise is drawn from the "factor"
/// substream and the i-th unique noise from "unique:<i>", so the factor path
/// does not depend on p. Throws ErrorCode::simulation_diverged with the
/// step index when the state becomes non-finite.
SamplePath simulate(const SimConfig& config);

/// Exact transition of dx = -(B x - mu) dt + S dW over a step h.
///
///   mean  = e^{-Bh} x + (int_0^h e^{-Bs} ds) mu
///   cov   = int_0^h e^{-Bs} S S' e^{-B's} ds
///
/// The integrals come from block matrix exponentials, so singular B needs
/// no special casing. The noise factor L (L L' = cov) is chosen as
/// L = chol(cov) chol(S S' h)^{-1} S sqrt(h) when S S' is nonsingular, which
/// reduces to S sqrt(h) for B = 0 and keeps the exact path aligned with an
/// Euler path driven by the same normals.
class OuTransition {
 public:
  OuTransition(const Matrix& b, const Vector& mu, const Matrix& s, double h);

  Vector step(const Vector& state, const Vector& noise) const;

  const Matrix& decay() const noexcept { return decay_; }
  const Vector& offset() const noexcept { return offset_; }
  const Matrix& covariance() const noexcept { return cov_; }
  const Matrix& noise_factor() const noexcept { return noise_factor_; }

 private:
  Matrix decay_;
  Vector offset_;
  Matrix cov_;
  Matrix noise_factor_;
};

Vector exact_ou_step(const Vector& state, const Matrix& b, const Vector& mu, const Matrix& s,
                     double h, const Vector& noise);

}  // namespace factorsde
