#include "factorsde/matrixcalc.hpp"

#include <cmath>
#include <string>

#include "factorsde/error.hpp"

namespace factorsde {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::not_symmetric: return "not_symmetric";
    case ErrorCode::not_positive_definite: return "not_positive_definite";
    case ErrorCode::untestable: return "untestable";
    case ErrorCode::simulation_diverged: return "simulation_diverged";
    case ErrorCode::fit_failed: return "fit_failed";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

Index sym_dim_from_size(Index len) noexcept {
  if (len < 1) return -1;
  auto p = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  return sym_size(p) == len ? p : -1;
}

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::dimension_mismatch,
                "SymMatrix: input is " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected square");
  }
  if (!m.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "SymMatrix: non-finite entry");
  }
  const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  const double asym = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * (1.0 + scale)) {
    throw Error(ErrorCode::not_symmetric,
                "SymMatrix: asymmetry " + std::to_string(asym) + " exceeds tolerance");
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zero(Index p) { return SymMatrix(Matrix::Zero(p, p)); }

SymMatrix SymMatrix::identity(Index p) { return SymMatrix(Matrix::Identity(p, p)); }

SymMatrix SymMatrix::diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

Matrix unvec(const Vector& v, Index p) {
  if (v.size() != p * p) {
    throw Error(ErrorCode::dimension_mismatch, "unvec: length is not p^2");
  }
  return Eigen::Map<const Matrix>(v.data(), p, p);
}

Vector vech(const SymMatrix& a) {
  const Index p = a.dim();
  Vector out(sym_size(p));
  Index pos = 0;
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) out(pos++) = a(i, j);
  }
  return out;
}

Vector vech(const Matrix& a) { return vech(SymMatrix(a)); }

SymMatrix unvech(const Vector& v) {
  const Index p = sym_dim_from_size(v.size());
  if (p < 0) {
    throw Error(ErrorCode::dimension_mismatch,
                "unvech: length " + std::to_string(v.size()) + " is not p(p+1)/2");
  }
  Matrix m(p, p);
  Index pos = 0;
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) {
      m(i, j) = v(pos);
      m(j, i) = v(pos);
      ++pos;
    }
  }
  return SymMatrix(m);
}

DuplicationMatrix::DuplicationMatrix(Index p) : p_(p) {
  if (p < 1) throw Error(ErrorCode::invalid_argument, "duplication: p must be >= 1");
  m_ = Matrix::Zero(p * p, sym_size(p));
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < p; ++i) {
      const Index col = i >= j ? vech_index(i, j, p) : vech_index(j, i, p);
      m_(i + p * j, col) = 1.0;
    }
  }
}

DuplicationMatrix duplication(Index p) { return DuplicationMatrix(p); }

Matrix duplication_pinv(const DuplicationMatrix& d) {
  const Matrix& dm = d.matrix();
  Vector inv_gram = dm.colwise().sum().transpose().cwiseInverse();
  return inv_gram.asDiagonal() * dm.transpose();
}

Matrix kron(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "kron: expects two square matrices of equal size");
  }
  const Index p = a.rows();
  Matrix out(p * p, p * p);
  for (Index i = 0; i < p; ++i) {
    for (Index k = 0; k < p; ++k) {
      out.block(p * i, p * k, p, p) = a(i, k) * b;
    }
  }
  return out;
}

}  // namespace factorsde
