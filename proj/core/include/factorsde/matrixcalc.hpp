#pragma once

// Symmetric-matrix calculus: vec, vech, the duplication matrix D_p and its
// left inverse, and the square Kronecker product.
//
// Indices are 0-based in code. Documentation and CSV/JSON outputs that name
// matrix entries (e.g. "Q_XX,12") use 1-based indices.

#include <Eigen/Dense>

namespace factorsde {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// p(p+1)/2
constexpr Index sym_size(Index p) noexcept { return p * (p + 1) / 2; }

/// Position of entry (row, col), row >= col, inside vech of a p x p matrix.
/// vech stacks the lower triangle column by column.
constexpr Index vech_index(Index row, Index col, Index p) noexcept {
  return col * p - col * (col - 1) / 2 + (row - col);
}

/// Inverse of sym_size; returns -1 when len is not triangular.
Index sym_dim_from_size(Index len) noexcept;

/// Dense symmetric matrix. Construction accepts inputs whose asymmetry is
/// within 1e-10 * (1 + max|a_ij|) and averages them into exact symmetry;
/// anything further off throws ErrorCode::not_symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix zero(Index p);
  static SymMatrix identity(Index p);
  static SymMatrix diagonal(const Vector& d);

  Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  Matrix m_;
};

/// Column stacking: entry (i, j) lands at i + p * j.
Vector vec(const Matrix& a);

/// Inverse of vec for a square p x p matrix.
Matrix unvec(const Vector& v, Index p);

/// Half-vectorization of a symmetric matrix.
Vector vech(const SymMatrix& a);

/// Half-vectorization of a raw matrix; rejects inputs that fail the
/// SymMatrix tolerance.
Vector vech(const Matrix& a);

/// Rebuilds the symmetric matrix whose vech is v.
SymMatrix unvech(const Vector& v);

/// The p^2 x p(p+1)/2 0/1 matrix with D_p vech(A) = vec(A), stored dense.
class DuplicationMatrix {
 public:
  explicit DuplicationMatrix(Index p);

  Index p() const noexcept { return p_; }
  const Matrix& matrix() const noexcept { return m_; }

 private:
  Index p_;
  Matrix m_;
};

DuplicationMatrix duplication(Index p);

/// D_p^+ = (D_p' D_p)^{-1} D_p'. D_p' D_p is diagonal (1 on diagonal
/// positions, 2 on off-diagonal positions), so the inverse is taken
/// entrywise.
Matrix duplication_pinv(const DuplicationMatrix& d);

/// Square Kronecker product: (A (x) B)(p*i + j, p*k + l) = a_ik * b_jl.
/// Throws ErrorCode::dimension_mismatch unless A and B are square with
/// equal dimension.
Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace factorsde
