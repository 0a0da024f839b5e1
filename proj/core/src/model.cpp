#include "factorsde/model.hpp"

#include <string>

#include "factorsde/error.hpp"

namespace factorsde {

const char* to_string(Regime r) noexcept {
  return r == Regime::ergodic ? "ergodic" : "non-ergodic";
}

Regime regime_from_string(const std::string& s) {
  if (s == "ergodic") return Regime::ergodic;
  if (s == "non-ergodic" || s == "non_ergodic" || s == "nonergodic") return Regime::non_ergodic;
  throw Error(ErrorCode::config, "unknown regime '" + s + "' (expected ergodic or non-ergodic)");
}

void ModelSpec::validate() const {
  if (p < 2) throw Error(ErrorCode::invalid_argument, "model: p must be >= 2");
  if (k < 1 || k >= p) {
    throw Error(ErrorCode::invalid_argument,
                "model: k must satisfy 1 <= k < p (got k=" + std::to_string(k) +
                    ", p=" + std::to_string(p) + ")");
  }
  if (n < 0) throw Error(ErrorCode::invalid_argument, "model: n must be >= 0");
  if (!(h >= 0.0)) throw Error(ErrorCode::invalid_argument, "model: h must be >= 0");
}

void ParamVector::check_shapes() const {
  const Index pp = p();
  const Index kk = k();
  if (kk < 1 || kk >= pp || a.rows() != pp - kk || a.cols() != kk) {
    throw Error(ErrorCode::dimension_mismatch,
                "ParamVector: A is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    ", Sigma_ff is " + std::to_string(kk) + "x" + std::to_string(kk) +
                    ", sigma_ee has length " + std::to_string(pp));
  }
}

Vector pack(const ParamVector& params) {
  params.check_shapes();
  const Index na = params.a.size();
  const Index nf = sym_size(params.k());
  Vector theta(params.q());
  theta.head(na) = vec(params.a);
  theta.segment(na, nf) = vech(params.sigma_ff);
  theta.tail(params.p()) = params.sigma_ee;
  return theta;
}

ParamVector unpack(const Vector& theta, Index p, Index k) {
  if (k < 1 || k >= p) throw Error(ErrorCode::invalid_argument, "unpack: need 1 <= k < p");
  if (theta.size() != param_count(p, k)) {
    throw Error(ErrorCode::dimension_mismatch,
                "unpack: expected " + std::to_string(param_count(p, k)) + " values, got " +
                    std::to_string(theta.size()));
  }
  const Index na = (p - k) * k;
  const Index nf = sym_size(k);
  ParamVector out;
  out.a = Eigen::Map<const Matrix>(theta.data(), p - k, k);
  out.sigma_ff = unvech(theta.segment(na, nf));
  out.sigma_ee = theta.tail(p);
  return out;
}

Matrix loading_matrix(const ParamVector& params) {
  params.check_shapes();
  const Index k = params.k();
  Matrix lambda(params.p(), k);
  lambda.topRows(k).setIdentity();
  lambda.bottomRows(params.p() - k) = params.a;
  return lambda;
}

SymMatrix sigma_of_theta(const ParamVector& params) {
  const Matrix lambda = loading_matrix(params);
  Matrix s = lambda * params.sigma_ff.matrix() * lambda.transpose();
  s.diagonal() += params.sigma_ee;
  return SymMatrix(s);
}

SymMatrix weight_matrix(const SymMatrix& sigma) {
  const Index p = sigma.dim();
  Eigen::LLT<Matrix> llt(sigma.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::not_positive_definite, "weight_matrix: Sigma is not positive definite");
  }
  const Index m = sym_size(p);
  Matrix w(m, m);
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) {
      const Index r = vech_index(i, j, p);
      for (Index l = 0; l < p; ++l) {
        for (Index k = l; k < p; ++k) {
          const Index c = vech_index(k, l, p);
          w(r, c) = sigma(i, k) * sigma(j, l) + sigma(i, l) * sigma(j, k);
        }
      }
    }
  }
  return SymMatrix(w);
}

std::vector<Matrix> sigma_derivatives(const ParamVector& params) {
  const Matrix lambda = loading_matrix(params);
  const Index p = params.p();
  const Index k = params.k();
  const Matrix& sff = params.sigma_ff.matrix();
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(params.q()));

  // vec A is column-major: a(r, c) for r fastest. Row r of A is row k + r of Lambda.
  const Matrix lambda_sff = lambda * sff;  // p x k
  for (Index c = 0; c < k; ++c) {
    for (Index r = 0; r < p - k; ++r) {
      Matrix d = Matrix::Zero(p, p);
      d.row(k + r) = lambda_sff.col(c).transpose();
      d.col(k + r) += lambda_sff.col(c);
      out.push_back(std::move(d));
    }
  }
  for (Index j = 0; j < k; ++j) {
    for (Index i = j; i < k; ++i) {
      Matrix d = lambda.col(i) * lambda.col(j).transpose();
      if (i != j) d += lambda.col(j) * lambda.col(i).transpose();
      out.push_back(std::move(d));
    }
  }
  for (Index i = 0; i < p; ++i) {
    Matrix d = Matrix::Zero(p, p);
    d(i, i) = 1.0;
    out.push_back(std::move(d));
  }
  return out;
}

Matrix delta_jacobian(const ParamVector& params) {
  const auto derivs = sigma_derivatives(params);
  const Index p = params.p();
  Matrix delta(sym_size(p), static_cast<Index>(derivs.size()));
  for (std::size_t j = 0; j < derivs.size(); ++j) {
    Index pos = 0;
    for (Index c = 0; c < p; ++c) {
      for (Index r = c; r < p; ++r) delta(pos++, static_cast<Index>(j)) = derivs[j](r, c);
    }
  }
  return delta;
}

WeightFactor::WeightFactor(const SymMatrix& w) : llt_(w.matrix()) {
  const double trace = w.matrix().trace();
  if (llt_.info() != Eigen::Success || !(trace > 0.0)) {
    throw Error(ErrorCode::not_positive_definite, "weight matrix is not positive definite");
  }
  const Vector pivots = Matrix(llt_.matrixL()).diagonal().array().square();
  if (pivots.minCoeff() <= 1e-12 * trace) {
    throw Error(ErrorCode::not_positive_definite,
                "weight matrix is numerically singular (pivot below 1e-12 * trace)");
  }
}

CovStructure cov_structure(const ParamVector& params) {
  SymMatrix sigma = sigma_of_theta(params);
  SymMatrix w = weight_matrix(sigma);
  return {std::move(sigma), std::move(w), delta_jacobian(params)};
}

double min_factor_eigenvalue(const ParamVector& params) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(params.sigma_ff.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace factorsde
