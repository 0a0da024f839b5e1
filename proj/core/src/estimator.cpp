#include "factorsde/estimator.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "factorsde/error.hpp"

namespace factorsde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// vech of a symmetric matrix with off-diagonal entries doubled, so that
// delta_j' weighted_vech(G) == sum_ab G_ab dSigma_j(a, b).
Vector weighted_vech(const Matrix& g) {
  const Index p = g.rows();
  Vector out(sym_size(p));
  Index pos = 0;
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) out(pos++) = (i == j ? 1.0 : 2.0) * g(i, j);
  }
  return out;
}

void check_dims(const RealisedCov& q, const ParamVector& params) {
  params.check_shapes();
  if (q.dim() != params.p()) {
    throw Error(ErrorCode::dimension_mismatch,
                "realised covariance is " + std::to_string(q.dim()) + "-dimensional, model has p=" +
                    std::to_string(params.p()));
  }
}

struct ContrastParts {
  double value;
  SymMatrix sigma;
  Matrix s;  // Sigma^{-1} (Q - Sigma) Sigma^{-1}
};

// W^{-1} = D_p' (Sigma^{-1} kron Sigma^{-1}) D_p / 2, so F = tr(Sigma^{-1} R Sigma^{-1} R) / 2
// with R = Q - Sigma. Only Sigma is factorised.
ContrastParts contrast_parts(const RealisedCov& q, const ParamVector& params) {
  check_dims(q, params);
  SymMatrix sigma = sigma_of_theta(params);
  const Eigen::LLT<Matrix> llt(sigma.matrix());
  const double trace = sigma.matrix().trace();
  if (llt.info() != Eigen::Success || !(trace > 0.0) ||
      Matrix(llt.matrixL()).diagonal().array().square().minCoeff() <= 1e-12 * trace) {
    throw Error(ErrorCode::not_positive_definite, "Sigma(theta) is not positive definite");
  }
  const Matrix r = q.q.matrix() - sigma.matrix();
  const Matrix a = llt.solve(r);  // Sigma^{-1} R
  Matrix s_mat = llt.solve(a.transpose());
  s_mat = 0.5 * (s_mat + s_mat.transpose());
  const double value = 0.5 * (a.array() * a.transpose().array()).sum();
  return {value, std::move(sigma), std::move(s_mat)};
}

Vector contrast_grad_from(const ContrastParts& parts, const Matrix& delta) {
  const Matrix g = parts.s + parts.s * parts.sigma.matrix() * parts.s;
  return -delta.transpose() * weighted_vech(g);
}

// Delta' W^{-1} Delta with entries tr(Sigma^{-1} dSigma_i Sigma^{-1} dSigma_j) / 2.
Matrix information(const ParamVector& params) {
  const SymMatrix sigma = sigma_of_theta(params);
  const Eigen::LLT<Matrix> llt(sigma.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::not_positive_definite, "Sigma(theta) is not positive definite");
  }
  const std::vector<Matrix> d = sigma_derivatives(params);
  std::vector<Matrix> b;
  b.reserve(d.size());
  for (const auto& dj : d) b.push_back(llt.solve(dj));
  const auto nq = static_cast<Index>(d.size());
  Matrix info(nq, nq);
  for (Index i = 0; i < nq; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = 0.5 * (b[static_cast<std::size_t>(i)].array() *
                              b[static_cast<std::size_t>(j)].transpose().array()).sum();
      info(i, j) = v;
      info(j, i) = v;
    }
  }
  return info;
}

std::optional<Matrix> gauss_newton_inverse(const Matrix& info) {
  Eigen::LLT<Matrix> llt(2.0 * info);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Matrix inv = llt.solve(Matrix::Identity(info.rows(), info.cols()));
  if (!inv.allFinite()) return std::nullopt;
  return inv;
}

MinimizeResult fixed_pilot_gauss_newton(const RealisedCov& q, Index p, Index k, const Vector& x0,
                                        const Box& box, const FitOptions& options) {
  const WeightFactor w0(weight_matrix(q.q));
  const Vector target = vech(q.q);
  auto evaluate = [&](const Vector& x, Vector& grad, Matrix& delta) {
    const ParamVector params = unpack(x, p, k);
    const Vector r = target - vech(sigma_of_theta(params));
    delta = delta_jacobian(params);
    const Vector u = w0.solve(r);
    grad = -2.0 * delta.transpose() * u;
    return r.dot(u);
  };

  MinimizeResult res;
  res.x = x0;
  Matrix delta;
  res.value = evaluate(res.x, res.gradient, delta);
  Vector g_new;
  Matrix delta_new;
  for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
    res.projected_gradient_norm = (res.x - box.project(res.x - res.gradient)).lpNorm<Eigen::Infinity>();
    if (res.projected_gradient_norm <= options.grad_tol * (1.0 + std::abs(res.value))) {
      res.converged = true;
      res.message = "projected gradient below tolerance";
      return res;
    }
    const Matrix info = delta.transpose() * w0.solve(delta);
    Vector d = info.ldlt().solve(-0.5 * res.gradient);
    for (Index i = 0; i < d.size(); ++i) {
      const bool held = (res.x(i) <= box.lower(i) && res.gradient(i) > 0.0) ||
                        (res.x(i) >= box.upper(i) && res.gradient(i) < 0.0);
      if (held) d(i) = 0.0;
    }
    if (!(d.dot(res.gradient) < 0.0)) d = -res.gradient;
    double alpha = 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
      x_new = box.project(res.x + alpha * d);
      f_new = evaluate(x_new, g_new, delta_new);
      if (f_new <= res.value + 1e-4 * res.gradient.dot(x_new - res.x)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.message = "line search failed";
      return res;
    }
    const double step = (x_new - res.x).lpNorm<Eigen::Infinity>();
    res.x = x_new;
    res.value = f_new;
    res.gradient = g_new;
    delta = delta_new;
    if (step <= options.step_tol * (1.0 + res.x.lpNorm<Eigen::Infinity>())) {
      res.projected_gradient_norm = (res.x - box.project(res.x - res.gradient)).lpNorm<Eigen::Infinity>();
      res.converged = res.projected_gradient_norm <= options.grad_tol * (1.0 + std::abs(res.value));
      res.message = res.converged ? "projected gradient below tolerance" : "step below tolerance";
      ++res.iterations;
      return res;
    }
  }
  res.projected_gradient_norm = (res.x - box.project(res.x - res.gradient)).lpNorm<Eigen::Infinity>();
  res.converged = res.projected_gradient_norm <= options.grad_tol * (1.0 + std::abs(res.value));
  res.message = res.converged ? "projected gradient below tolerance" : "iteration limit reached";
  return res;
}

}  // namespace

RealisedCov realised_cov(const Matrix& observations, double h) {
  if (observations.rows() < 2) {
    throw Error(ErrorCode::invalid_argument, "realised_cov: need at least 2 observations");
  }
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "realised_cov: h must be positive");
  const Index n = observations.rows() - 1;
  const Matrix inc = observations.bottomRows(n) - observations.topRows(n);
  const double horizon = static_cast<double>(n) * h;
  Matrix q = Matrix::Zero(observations.cols(), observations.cols());
  q.selfadjointView<Eigen::Lower>().rankUpdate(inc.transpose(), 1.0 / horizon);
  q = q.selfadjointView<Eigen::Lower>();
  return {SymMatrix(q), n, h};
}

RealisedCov realised_cov(const SamplePath& path) { return realised_cov(path.x, path.h); }

double contrast(const RealisedCov& q, const ParamVector& params) {
  return contrast_parts(q, params).value;
}

Vector contrast_grad(const RealisedCov& q, const ParamVector& params) {
  const auto parts = contrast_parts(q, params);
  return contrast_grad_from(parts, delta_jacobian(params));
}

double quasi_loglik_excess(const RealisedCov& q, const ParamVector& params) {
  check_dims(q, params);
  const Eigen::LLT<Matrix> q_llt(q.q.matrix());
  if (q_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::not_positive_definite, "quasi-likelihood: Q_XX is not positive definite");
  }
  const SymMatrix sigma = sigma_of_theta(params);
  const Eigen::LLT<Matrix> s_llt(sigma.matrix());
  if (s_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::not_positive_definite, "quasi-likelihood: Sigma(theta) is not positive definite");
  }
  const double logdet_s = 2.0 * Matrix(s_llt.matrixL()).diagonal().array().log().sum();
  const double logdet_q = 2.0 * Matrix(q_llt.matrixL()).diagonal().array().log().sum();
  const double trace = s_llt.solve(q.q.matrix()).trace();
  return logdet_s - logdet_q + trace - static_cast<double>(q.dim());
}

Vector quasi_loglik_grad(const RealisedCov& q, const ParamVector& params) {
  check_dims(q, params);
  const SymMatrix sigma = sigma_of_theta(params);
  const Eigen::LLT<Matrix> s_llt(sigma.matrix());
  if (s_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::not_positive_definite, "quasi-likelihood: Sigma(theta) is not positive definite");
  }
  const Matrix r = q.q.matrix() - sigma.matrix();
  const Matrix left = s_llt.solve(r);
  Matrix g = -s_llt.solve(left.transpose());
  g = 0.5 * (g + g.transpose());
  return delta_jacobian(params).transpose() * weighted_vech(g);
}

Box default_box(Index p, Index k) {
  Box box = Box::unbounded(param_count(p, k));
  box.lower.tail(p).setConstant(1e-8);
  return box;
}

Box symmetric_box(Index p, Index k, double bound) {
  const Index q = param_count(p, k);
  return {Vector::Constant(q, -bound), Vector::Constant(q, bound)};
}

ParamVector default_init(const RealisedCov& q, Index k) {
  const Index p = q.dim();
  const Matrix qm = q.q.matrix();
  ParamVector fallback;
  fallback.a = Matrix::Zero(p - k, k);
  fallback.sigma_ff = SymMatrix::diagonal(qm.diagonal().head(k));
  fallback.sigma_ee = 0.5 * qm.diagonal();

  // Principal-axis factoring, then rotation to the (I_k; A) normalisation.
  const Vector floor = 1e-3 * qm.diagonal();
  Vector psi = fallback.sigma_ee;
  Matrix loadings;
  for (int it = 0; it < 50; ++it) {
    Matrix reduced = qm;
    reduced.diagonal() -= psi;
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(reduced);
    if (eig.info() != Eigen::Success) return fallback;
    const Vector top = eig.eigenvalues().tail(k).cwiseMax(0.0);
    loadings = eig.eigenvectors().rightCols(k) * top.cwiseSqrt().asDiagonal();
    psi = (qm.diagonal() - loadings.rowwise().squaredNorm()).cwiseMax(floor);
  }
  const Matrix head = loadings.topRows(k);
  const Eigen::FullPivLU<Matrix> lu(head);
  if (!lu.isInvertible() || lu.rcond() < 1e-8) return fallback;
  ParamVector init;
  init.a = loadings.bottomRows(p - k) * lu.inverse();
  init.sigma_ff = SymMatrix(head * head.transpose());
  init.sigma_ee = psi;
  if (!init.a.allFinite()) return fallback;
  return init;
}

FitResult fit(const RealisedCov& q, const ModelSpec& spec, const std::optional<ParamVector>& init,
              const FitOptions& options) {
  spec.validate();
  const Index p = spec.p;
  const Index k = spec.k;
  if (q.dim() != p) {
    throw Error(ErrorCode::dimension_mismatch,
                "fit: data has p=" + std::to_string(q.dim()) + " but the model has p=" + std::to_string(p));
  }
  const Box box = options.box       ? *options.box
                  : options.box_bound ? symmetric_box(p, k, *options.box_bound)
                                      : default_box(p, k);
  if (box.size() != spec.q()) throw Error(ErrorCode::dimension_mismatch, "fit: box has wrong length");
  const Vector x0 = init ? pack(*init) : box.project(pack(default_init(q, k)));
  if (x0.size() != spec.q()) throw Error(ErrorCode::dimension_mismatch, "fit: init has wrong shape");
  if (!box.contains(x0)) throw Error(ErrorCode::invalid_argument, "fit: init lies outside the parameter box");

  MinimizeOptions mopts;
  mopts.grad_tol = options.grad_tol;
  mopts.step_tol = options.step_tol;
  mopts.max_iter = options.max_iter;

  MinimizeResult mres;
  if (options.weighting == Weighting::fixed_pilot && options.objective == Objective::contrast) {
    mres = fixed_pilot_gauss_newton(q, p, k, x0, box, options);
  } else {
    ObjectiveFn objective;
    if (options.objective == Objective::contrast) {
      objective = [&](const Vector& x, Vector* grad) -> std::optional<double> {
        const ParamVector params = unpack(x, p, k);
        try {
          const auto parts = contrast_parts(q, params);
          if (grad) *grad = contrast_grad_from(parts, delta_jacobian(params));
          return parts.value;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::not_positive_definite) return std::nullopt;
          throw;
        }
      };
    } else {
      objective = [&](const Vector& x, Vector* grad) -> std::optional<double> {
        const ParamVector params = unpack(x, p, k);
        try {
          const double value = quasi_loglik_excess(q, params);
          if (grad) *grad = quasi_loglik_grad(q, params);
          return value;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::not_positive_definite) return std::nullopt;
          throw;
        }
      };
    }
    std::optional<Matrix> h0;
    try {
      const ParamVector p0 = unpack(x0, p, k);
      h0 = gauss_newton_inverse(information(p0));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::not_positive_definite) throw;
    }
    mres = minimize_projected_bfgs(objective, x0, box, mopts, h0);
  }

  FitResult out;
  out.theta_hat = unpack(mres.x, p, k);
  out.objective_value = mres.value;
  out.converged = mres.converged;
  out.iterations = mres.iterations;
  out.gradient_norm = mres.projected_gradient_norm;
  out.message = mres.message;
  out.n = q.n;
  out.min_factor_eigenvalue = min_factor_eigenvalue(out.theta_hat);
  out.heywood = out.min_factor_eigenvalue < 0.0 || (out.theta_hat.sigma_ee.array() <= 0.0).any();

  const Index nq = spec.q();
  out.avar = Matrix::Constant(nq, nq, kNaN);
  out.se = Vector::Constant(nq, kNaN);
  try {
    out.contrast = contrast_parts(q, out.theta_hat).value;
    Eigen::LLT<Matrix> llt(information(out.theta_hat));
    if (llt.info() == Eigen::Success) {
      out.avar = llt.solve(Matrix::Identity(nq, nq));
      out.avar = 0.5 * (out.avar + out.avar.transpose());
      if (q.n > 0) {
        out.se = (out.avar.diagonal() / static_cast<double>(q.n)).cwiseMax(0.0).cwiseSqrt();
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::not_positive_definite) throw;
    out.contrast = kNaN;
    out.converged = false;
    out.message += "; Sigma not positive definite at the estimate";
  }
  return out;
}

}  // namespace factorsde
