#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <memory>

#include "dlrv/errors.hpp"

namespace dlrv {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Compressed-row storage; column indices strictly increasing within a row.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Prefactorized SPD sparse matrix, M = Pᵀ·L·Lᵀ·P with a fill-reducing
/// permutation P. Cheap to copy (shared factor).
class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  int rows() const;

  /// Solves M·Y = B for (possibly multi-column) B.
  DenseMatrix solve(const DenseMatrix& B) const;

  /// B = Lᵀ·P·A, so that Bᵀ·B = Aᵀ·M·A. Euclidean geometry of B is the
  /// M-geometry of A.
  DenseMatrix to_factor_space(const DenseMatrix& A) const;

  /// Inverse of to_factor_space: returns Q with Lᵀ·P·Q = W.
  DenseMatrix from_factor_space(const DenseMatrix& W) const;

 private:
  friend CholeskyFactor cholesky(const SparseMatrix&, bool);
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Sparse-dense product with dimension validation.
DenseMatrix spmm(const SparseMatrix& A, const DenseMatrix& B);

/// Factors a symmetric positive definite matrix for repeated solves.
/// spd_check additionally verifies symmetry of the input.
CholeskyFactor cholesky(const SparseMatrix& M, bool spd_check = true);

struct MOrthResult {
  DenseMatrix Q;  // n×r, Qᵀ·M·Q = I
  DenseMatrix R;  // r×r upper triangular, diag(R) ≥ 0, Q·R = A
};

/// M-weighted thin QR: A = Q·R with Qᵀ·M·Q = I. Implemented as Euclidean QR
/// of Lᵀ·P·A followed by back-transformation. Throws RankDeficient when a
/// diagonal entry of R falls below 1e-12·max|R|.
MOrthResult m_orthonormalize(const DenseMatrix& A, const CholeskyFactor& M);

struct MOrthRrResult {
  DenseMatrix Q;  // n×k with k = rank
  DenseMatrix R;  // k×m, Q·R = A up to the dropped-tail tolerance
  int rank;
};

/// Rank-revealing variant: numerically dependent columns are dropped instead
/// of raising, Q keeps only the rank-many independent directions.
MOrthRrResult m_orthonormalize_rr(const DenseMatrix& A, const CholeskyFactor& M,
                                  double rel_tol = 1e-12);

struct SvdTruncation {
  DenseMatrix Qx;  // leading r1 left singular vectors
  Vector sigma;    // leading r1 singular values, decreasing
  DenseMatrix Qv;  // leading r1 right singular vectors
  int r1;
};

/// Full SVD of S followed by the tail-energy truncation rule: r1 is the
/// smallest rank whose discarded tail satisfies Σ_{i>r1} σ_i² < eps²
/// (strict), clamped to [1, r_max]. Singular vectors carry a deterministic
/// sign convention (first significant entry of each left vector ≥ 0).
SvdTruncation svd_truncate(const DenseMatrix& S, double eps, int r_max);

using OdeRhs = std::function<DenseMatrix(double, const DenseMatrix&)>;

/// One Shu-Osher SSP-RK3 step from (t, Y) over dt. Throws NumericalBlowup
/// when a stage turns non-finite.
DenseMatrix rk3_step(const OdeRhs& rhs, const DenseMatrix& Y, double t, double dt);

}  // namespace dlrv
