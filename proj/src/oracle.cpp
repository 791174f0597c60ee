#include "dlrv/oracle.hpp"

#include <cmath>

#include "dlrv/errors.hpp"

namespace dlrv {

double phi_bump(double z) {
  double a = std::abs(z);
  if (a > 1.0) return 0.0;
  return z * z * (2.0 * a - 3.0) + 1.0;
}

double CharacteristicsSolution::initial(const Vec2& x, const Vec2& v) const {
  double f = 1.0;
  for (int k = 0; k < 2; ++k) {
    f *= phi_bump((x[k] - x_center[k]) / sigma_x);
    f *= phi_bump((v[k] - v_center[k]) / sigma_v);
  }
  return f;
}

double CharacteristicsSolution::factor(int k, double t, double xk, double vk) const {
  double x0 = xk - vk * t - 0.5 * E[k] * t * t;
  double v0 = vk + E[k] * t;
  return phi_bump((x0 - x_center[k]) / sigma_x) *
         phi_bump((v0 - v_center[k]) / sigma_v);
}

double fbar(double t, const Vec2& x, const Vec2& v,
            const CharacteristicsSolution& sol) {
  return sol.factor(0, t, x[0], v[0]) * sol.factor(1, t, x[1], v[1]);
}

double landau_f0(const Vec2& x, const Vec2& v, double alpha, double k, int dim) {
  if (dim == 1) {
    double maxwell = std::exp(-0.5 * v.x() * v.x()) / std::sqrt(2.0 * M_PI);
    return maxwell * (1.0 + alpha * std::cos(k * x.x()));
  }
  double maxwell = std::exp(-0.5 * v.squaredNorm()) / (2.0 * M_PI);
  return maxwell * (1.0 + alpha * std::cos(k * x.x()) + alpha * std::cos(k * x.y()));
}

DenseMatrix full_galerkin_step(const DenseMatrix& F, const OperatorSet& ops,
                               InflowProvider* inflow, double t, double dt,
                               double delta) {
  if (static_cast<long>(ops.n_x) * ops.n_v > 5000)
    throw InvalidArgument(
        "full_galerkin_step: refusing dense dynamics beyond 5000 coefficients");
  if (F.rows() != ops.n_x || F.cols() != ops.n_v)
    throw InvalidArgument("full_galerkin_step: coefficient shape mismatch");

  auto rhs = [&](double ts, const DenseMatrix& Y) {
    DenseMatrix R = DenseMatrix::Zero(ops.n_x, ops.n_v);
    for (int k = 0; k < ops.dim; ++k) {
      R.noalias() -= ops.Tx[k] * Y * ops.Mv_k[k].transpose();
      R.noalias() += ops.Mx_E[k] * Y * ops.Tv[k].transpose();
    }
    if (delta != 0.0) {
      R.noalias() -= delta * (ops.Cx * Y * ops.Mv.transpose());
      R.noalias() -= delta * (ops.Mx * Y * ops.Cv.transpose());
    }
    for (int nu = 0; nu < ops.n_pieces(); ++nu)
      R.noalias() += ops.Mx_bnd[nu] * Y * ops.Mv_half[nu].transpose();
    if (inflow) {
      const InflowAssembly* a = inflow->assembly_at(ts);
      if (a && !a->empty())
        for (size_t nu = 0; nu < a->bx.size(); ++nu)
          for (int mu = 0; mu < a->n_terms; ++mu)
            R.noalias() -= a->bx[nu][mu] * a->bv[nu][mu].transpose();
    }
    // Ḟ = Mx⁻¹ · R · Mv⁻¹
    DenseMatrix tmp = ops.Mx_chol.solve(R);
    return DenseMatrix(ops.Mv_chol.solve(tmp.transpose()).transpose());
  };
  return rk3_step(rhs, F, t, dt);
}

}  // namespace dlrv
