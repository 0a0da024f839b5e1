#include "factorsde/sde_sim.hpp"

#include <cmath>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>

#include "factorsde/error.hpp"
#include "factorsde/rng.hpp"

namespace factorsde {

namespace {

bool close_rel(const Matrix& a, const Matrix& b, double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() <= tol * (1.0 + scale);
}

[[noreturn]] void shape_error(const std::string& what) {
  throw Error(ErrorCode::dimension_mismatch, "SimConfig: " + what);
}

}  // namespace

DriftSpec DriftSpec::linear_ou(Matrix b, Vector mu) {
  if (b.rows() != b.cols() || b.rows() != mu.size()) {
    throw Error(ErrorCode::dimension_mismatch, "linear_ou drift: B must be square and match mu");
  }
  DriftSpec d;
  d.kind_ = LinearDrift{std::move(b), std::move(mu)};
  return d;
}

DriftSpec DriftSpec::scalar_ou(double b, double mu) {
  return linear_ou(Matrix::Constant(1, 1, b), Vector::Constant(1, mu));
}

DriftSpec DriftSpec::custom(std::function<Vector(const Vector&)> fn, double lipschitz,
                            std::string name) {
  if (!fn) throw Error(ErrorCode::invalid_argument, "custom drift: empty function");
  DriftSpec d;
  d.kind_ = CustomDrift{std::move(fn), lipschitz, std::move(name)};
  return d;
}

Index DriftSpec::dim() const noexcept {
  return is_linear() ? std::get<LinearDrift>(kind_).b.rows() : -1;
}

Vector DriftSpec::evaluate(const Vector& x) const {
  if (const auto* lin = std::get_if<LinearDrift>(&kind_)) return lin->mu - lin->b * x;
  return std::get<CustomDrift>(kind_).fn(x);
}

void SimConfig::validate() const {
  spec.validate();
  params.check_shapes();
  const Index p = spec.p;
  const Index k = spec.k;
  if (params.p() != p || params.k() != k) shape_error("params do not match (p, k)");
  if (!(spec.h > 0.0) || !std::isfinite(spec.h)) {
    throw Error(ErrorCode::invalid_argument, "SimConfig: h must be positive and finite");
  }
  if (spec.n < 1) throw Error(ErrorCode::invalid_argument, "SimConfig: n must be >= 1");
  if (substeps < 1) throw Error(ErrorCode::invalid_argument, "SimConfig: substeps must be >= 1");
  if (factor_dispersion.rows() != k || factor_dispersion.cols() < 1) {
    shape_error("factor dispersion S must have k rows");
  }
  if (factor_drift.is_linear() && factor_drift.dim() != k) shape_error("factor drift dimension != k");
  if (static_cast<Index>(unique_drifts.size()) != p) shape_error("need p unique drifts");
  for (const auto& d : unique_drifts) {
    if (d.is_linear() && d.dim() != 1) shape_error("unique drifts must be scalar");
  }
  if (unique_dispersions.size() != p) shape_error("need p unique dispersions");
  if ((unique_dispersions.array() < 0.0).any() || !unique_dispersions.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "SimConfig: unique dispersions must be >= 0");
  }
  if (f0.size() != k) shape_error("f0 must have length k");
  if (e0.size() != p) shape_error("e0 must have length p");
  if (!close_rel(factor_dispersion * factor_dispersion.transpose(), params.sigma_ff.matrix(), 1e-9)) {
    throw Error(ErrorCode::invalid_argument, "SimConfig: S S' does not equal Sigma_ff of params");
  }
  if (!close_rel(unique_dispersions.array().square().matrix(), params.sigma_ee, 1e-9)) {
    throw Error(ErrorCode::invalid_argument,
                "SimConfig: squared unique dispersions do not equal sigma_ee of params");
  }
  if (scheme == Scheme::exact_ou) {
    bool linear = factor_drift.is_linear();
    for (const auto& d : unique_drifts) linear = linear && d.is_linear();
    if (!linear) {
      throw Error(ErrorCode::invalid_argument, "SimConfig: exact_ou scheme needs linear drifts");
    }
  }
}

SimConfig make_sim_config(const ModelSpec& spec, const Matrix& a, DriftSpec factor_drift,
                          const Matrix& s, std::vector<DriftSpec> unique_drifts,
                          const Vector& sigmas, const Vector& f0, const Vector& e0,
                          std::uint64_t seed) {
  SimConfig c;
  c.spec = spec;
  c.params.a = a;
  c.params.sigma_ff = SymMatrix(s * s.transpose());
  c.params.sigma_ee = sigmas.array().square().matrix();
  c.factor_drift = std::move(factor_drift);
  c.factor_dispersion = s;
  c.unique_drifts = std::move(unique_drifts);
  c.unique_dispersions = sigmas;
  c.f0 = f0;
  c.e0 = e0;
  c.seed = seed;
  return c;
}

OuTransition::OuTransition(const Matrix& b, const Vector& mu, const Matrix& s, double h) {
  const Index k = b.rows();
  if (b.cols() != k || mu.size() != k || s.rows() != k) {
    throw Error(ErrorCode::dimension_mismatch, "OU transition: inconsistent B, mu, S");
  }
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "OU transition: h must be positive");

  Matrix aug = Matrix::Zero(2 * k, 2 * k);
  aug.topLeftCorner(k, k) = -b * h;
  aug.topRightCorner(k, k) = Matrix::Identity(k, k) * h;
  const Matrix aug_exp = aug.exp();
  decay_ = aug_exp.topLeftCorner(k, k);
  offset_ = aug_exp.topRightCorner(k, k) * mu;

  const Matrix q = s * s.transpose();
  Matrix vl = Matrix::Zero(2 * k, 2 * k);
  vl.topLeftCorner(k, k) = b * h;
  vl.topRightCorner(k, k) = q * h;
  vl.bottomRightCorner(k, k) = -b.transpose() * h;
  const Matrix vl_exp = vl.exp();
  cov_ = vl_exp.bottomRightCorner(k, k).transpose() * vl_exp.topRightCorner(k, k);
  cov_ = 0.5 * (cov_ + cov_.transpose());

  const Index r = s.cols();
  const Matrix q_h = q * h;
  Eigen::LLT<Matrix> q_llt(q_h);
  const bool q_regular = q_llt.info() == Eigen::Success && q_h.trace() > 0.0 &&
                         Matrix(q_llt.matrixL()).diagonal().minCoeff() >
                             1e-10 * std::sqrt(q_h.trace());
  if (q_regular) {
    Eigen::LLT<Matrix> c_llt(cov_);
    if (c_llt.info() != Eigen::Success) {
      throw Error(ErrorCode::not_positive_definite, "OU transition: covariance not PD");
    }
    const Matrix aligned = q_llt.matrixL().solve(s * std::sqrt(h));
    noise_factor_ = Matrix(c_llt.matrixL()) * aligned;
  } else {
    if (r != k) {
      throw Error(ErrorCode::invalid_argument,
                  "OU transition: rank-deficient S requires a square dispersion matrix");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov_);
    noise_factor_ = es.eigenvectors() *
                    es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                    es.eigenvectors().transpose();
  }
}

Vector OuTransition::step(const Vector& state, const Vector& noise) const {
  return decay_ * state + offset_ + noise_factor_ * noise;
}

Vector exact_ou_step(const Vector& state, const Matrix& b, const Vector& mu, const Matrix& s,
                     double h, const Vector& noise) {
  if (noise.size() != s.cols() || state.size() != b.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "exact_ou_step: state/noise length mismatch");
  }
  return OuTransition(b, mu, s, h).step(state, noise);
}

SamplePath simulate(const SimConfig& config) {
  config.validate();
  const Index p = config.spec.p;
  const Index k = config.spec.k;
  const Index n = config.spec.n;
  const Index r = config.factor_dispersion.cols();
  const int m = config.substeps;
  const double h = config.spec.h;
  const double dt = h / m;
  const double sqdt = std::sqrt(dt);
  const Matrix lambda = loading_matrix(config.params);

  NormalStream factor_noise(config.seed, "factor");
  std::vector<NormalStream> unique_noise;
  unique_noise.reserve(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) unique_noise.emplace_back(config.seed, "unique:" + std::to_string(i));

  std::optional<OuTransition> factor_exact;
  std::vector<OuTransition> unique_exact;
  if (config.scheme == Scheme::exact_ou) {
    const auto& lin = config.factor_drift.linear();
    factor_exact.emplace(lin.b, lin.mu, config.factor_dispersion, h);
    for (Index i = 0; i < p; ++i) {
      const auto& u = config.unique_drifts[static_cast<std::size_t>(i)].linear();
      unique_exact.emplace_back(u.b, u.mu, Matrix::Constant(1, 1, config.unique_dispersions(i)), h);
    }
  }

  SamplePath path;
  path.h = h;
  path.x.resize(n + 1, p);
  if (config.retain_latents) {
    path.f = Matrix(n + 1, k);
    path.e = Matrix(n + 1, p);
  }

  Vector f = config.f0;
  Vector e = config.e0;
  Vector zf(r);
  Vector zf_sum(r);
  Vector ze_sum(p);
  Vector scalar(1);

  auto record = [&](Index row) {
    path.x.row(row) = (lambda * f + e).transpose();
    if (config.retain_latents) {
      path.f->row(row) = f.transpose();
      path.e->row(row) = e.transpose();
    }
  };
  record(0);

  for (Index step = 1; step <= n; ++step) {
    if (config.scheme == Scheme::euler) {
      for (int s = 0; s < m; ++s) {
        for (Index j = 0; j < r; ++j) zf(j) = factor_noise.normal();
        f += config.factor_drift.evaluate(f) * dt + config.factor_dispersion * zf * sqdt;
        for (Index i = 0; i < p; ++i) {
          scalar(0) = e(i);
          const double drift = config.unique_drifts[static_cast<std::size_t>(i)].evaluate(scalar)(0);
          e(i) += drift * dt + config.unique_dispersions(i) * sqdt * unique_noise[static_cast<std::size_t>(i)].normal();
        }
      }
    } else {
      zf_sum.setZero();
      ze_sum.setZero();
      for (int s = 0; s < m; ++s) {
        for (Index j = 0; j < r; ++j) zf_sum(j) += factor_noise.normal();
        for (Index i = 0; i < p; ++i) ze_sum(i) += unique_noise[static_cast<std::size_t>(i)].normal();
      }
      const double norm = 1.0 / std::sqrt(static_cast<double>(m));
      f = factor_exact->step(f, zf_sum * norm);
      for (Index i = 0; i < p; ++i) {
        scalar(0) = e(i);
        e(i) = unique_exact[static_cast<std::size_t>(i)].step(scalar, Vector::Constant(1, ze_sum(i) * norm))(0);
      }
    }
    if (!f.allFinite() || !e.allFinite()) {
      throw Error(ErrorCode::simulation_diverged,
                  "simulate: non-finite state at step " + std::to_string(step));
    }
    record(step);
  }
  return path;
}

}  // namespace factorsde
