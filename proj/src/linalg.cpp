#include "dlrv/linalg.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace dlrv {

struct CholeskyFactor::Impl {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  Eigen::SparseMatrix<double> L;  // lower factor, column major
  Eigen::SparseMatrix<double> U;  // Lᵀ
  Eigen::PermutationMatrix<Eigen::Dynamic> P;
  int n = 0;
};

int CholeskyFactor::rows() const { return impl_ ? impl_->n : 0; }

DenseMatrix CholeskyFactor::solve(const DenseMatrix& B) const {
  if (!impl_) throw InvalidArgument("cholesky: empty factor");
  if (B.rows() != impl_->n)
    throw InvalidArgument("cholesky solve: dimension mismatch");
  return impl_->llt.solve(B);
}

DenseMatrix CholeskyFactor::to_factor_space(const DenseMatrix& A) const {
  if (!impl_ || A.rows() != impl_->n)
    throw InvalidArgument("to_factor_space: dimension mismatch");
  return impl_->U * (impl_->P * A);
}

DenseMatrix CholeskyFactor::from_factor_space(const DenseMatrix& W) const {
  if (!impl_ || W.rows() != impl_->n)
    throw InvalidArgument("from_factor_space: dimension mismatch");
  DenseMatrix Z = impl_->U.triangularView<Eigen::Upper>().solve(W);
  return impl_->P.transpose() * Z;
}

DenseMatrix spmm(const SparseMatrix& A, const DenseMatrix& B) {
  if (A.cols() != B.rows()) throw InvalidArgument("spmm: dimension mismatch");
  return A * B;
}

CholeskyFactor cholesky(const SparseMatrix& M, bool spd_check) {
  if (M.rows() != M.cols()) throw InvalidArgument("cholesky: matrix not square");
  Eigen::SparseMatrix<double> Mc(M);
  if (spd_check) {
    Eigen::SparseMatrix<double> D = Mc - Eigen::SparseMatrix<double>(Mc.transpose());
    double asym = 0.0, scale = 0.0;
    for (int k = 0; k < D.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it)
        asym = std::max(asym, std::abs(it.value()));
    for (int k = 0; k < Mc.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(Mc, k); it; ++it)
        scale = std::max(scale, std::abs(it.value()));
    if (asym > 1e-12 * std::max(scale, 1e-300))
      throw InvalidArgument("cholesky: matrix not symmetric");
  }
  auto impl = std::make_shared<CholeskyFactor::Impl>();
  impl->llt.compute(Mc);
  if (impl->llt.info() != Eigen::Success)
    throw NotPositiveDefinite("cholesky: matrix not positive definite");
  impl->L = impl->llt.matrixL();
  impl->U = impl->L.transpose();
  impl->P = impl->llt.permutationP();
  impl->n = static_cast<int>(Mc.rows());
  CholeskyFactor f;
  f.impl_ = std::move(impl);
  return f;
}

namespace {

// Thin Householder QR with the sign convention diag(R) >= 0.
void thin_qr(const DenseMatrix& B, DenseMatrix& Q, DenseMatrix& R) {
  const auto n = B.rows();
  const auto r = B.cols();
  Eigen::HouseholderQR<DenseMatrix> qr(B);
  Q = qr.householderQ() * DenseMatrix::Identity(n, r);
  R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < r; ++j) {
    if (R(j, j) < 0.0) {
      R.row(j) = -R.row(j);
      Q.col(j) = -Q.col(j);
    }
  }
}

}  // namespace

MOrthResult m_orthonormalize(const DenseMatrix& A, const CholeskyFactor& M) {
  if (A.cols() > A.rows())
    throw InvalidArgument("m_orthonormalize: more columns than rows");
  DenseMatrix B = M.to_factor_space(A);
  DenseMatrix W, R;
  thin_qr(B, W, R);
  double rmax = R.cwiseAbs().maxCoeff();
  if (rmax == 0.0) throw RankDeficient("m_orthonormalize: zero input");
  for (Eigen::Index j = 0; j < R.cols(); ++j)
    if (R(j, j) < 1e-12 * rmax)
      throw RankDeficient("m_orthonormalize: column " + std::to_string(j) +
                          " numerically dependent");
  return {M.from_factor_space(W), std::move(R)};
}

MOrthRrResult m_orthonormalize_rr(const DenseMatrix& A, const CholeskyFactor& M,
                                  double rel_tol) {
  DenseMatrix B = M.to_factor_space(A);
  const auto n = B.rows();
  const auto m = B.cols();
  Eigen::ColPivHouseholderQR<DenseMatrix> qr(B);
  int rank = 0;
  const DenseMatrix& QR = qr.matrixQR();
  double dmax = std::abs(QR(0, 0));
  for (Eigen::Index j = 0; j < std::min(n, m); ++j)
    if (std::abs(QR(j, j)) > rel_tol * dmax) ++rank;
  if (rank == 0)
    return {DenseMatrix(n, 0), DenseMatrix(0, m), 0};
  DenseMatrix W = qr.householderQ() * DenseMatrix::Identity(n, rank);
  DenseMatrix Rp = QR.topRows(rank).triangularView<Eigen::Upper>();
  for (int j = 0; j < rank; ++j) {
    if (Rp(j, j) < 0.0) {
      Rp.row(j) = -Rp.row(j);
      W.col(j) = -W.col(j);
    }
  }
  // undo the column pivoting so that Q·R = A in the original column order
  DenseMatrix R = Rp * qr.colsPermutation().transpose();
  return {M.from_factor_space(W), std::move(R), rank};
}

SvdTruncation svd_truncate(const DenseMatrix& S, double eps, int r_max) {
  if (!S.allFinite()) throw InvalidArgument("svd_truncate: non-finite entries");
  if (r_max < 1) throw InvalidArgument("svd_truncate: r_max must be positive");
  Eigen::JacobiSVD<DenseMatrix> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const int r = static_cast<int>(sv.size());

  // smallest rank whose discarded tail energy is strictly below eps²
  int r1 = r;
  for (int k = 0; k <= r; ++k) {
    double tail = 0.0;
    for (int i = k; i < r; ++i) tail += sv[i] * sv[i];
    if (tail < eps * eps) {
      r1 = k;
      break;
    }
  }
  r1 = std::max(r1, 1);
  r1 = std::min({r1, r_max, r});
  if (r == 0) r1 = 0;

  DenseMatrix Qx = svd.matrixU().leftCols(r1);
  DenseMatrix Qv = svd.matrixV().leftCols(r1);
  for (int i = 0; i < r1; ++i) {
    double cmax = Qx.col(i).cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < Qx.rows(); ++j) {
      if (std::abs(Qx(j, i)) > 1e-12 * cmax) {
        if (Qx(j, i) < 0.0) {
          Qx.col(i) = -Qx.col(i);
          Qv.col(i) = -Qv.col(i);
        }
        break;
      }
    }
  }
  return {std::move(Qx), sv.head(r1), std::move(Qv), r1};
}

DenseMatrix rk3_step(const OdeRhs& rhs, const DenseMatrix& Y, double t, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("rk3_step: dt must be positive");
  auto check = [&](const DenseMatrix& M, double ts) {
    if (!M.allFinite()) throw NumericalBlowup("rk3_step: non-finite stage", ts);
  };
  DenseMatrix Y1 = Y + dt * rhs(t, Y);
  check(Y1, t);
  DenseMatrix Y2 = 0.75 * Y + 0.25 * (Y1 + dt * rhs(t + dt, Y1));
  check(Y2, t + dt);
  DenseMatrix Yn = (1.0 / 3.0) * Y + (2.0 / 3.0) * (Y2 + dt * rhs(t + 0.5 * dt, Y2));
  check(Yn, t + 0.5 * dt);
  return Yn;
}

}  // namespace dlrv
