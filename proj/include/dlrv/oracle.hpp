#pragma once

#include "dlrv/fem.hpp"
#include "dlrv/inflow.hpp"
#include "dlrv/linalg.hpp"

namespace dlrv {

/// C¹ bump φ(z) = z²(2|z|−3)+1 on |z| ≤ 1, zero outside.
double phi_bump(double z);

/// Exact transported solution of ∂_t f + v·∇ₓf − E·∇ᵥf = 0 on free space
/// with a product-of-bumps initial condition:
/// f̄(t,x,v) = f̄₀(x − v·t − E·t²/2, v + E·t).
struct CharacteristicsSolution {
  Vec2 E = Vec2(0.0, 4.0);
  double sigma_x = 0.2;
  double sigma_v = 0.5;
  Vec2 x_center = Vec2(0.5 + 0.2, 0.1);
  Vec2 v_center = Vec2(2.0, 0.0);

  double initial(const Vec2& x, const Vec2& v) const;
  /// Separable factor in direction k: f̄ = Π_k factor(k, t, x_k, v_k).
  double factor(int k, double t, double xk, double vk) const;
};

double fbar(double t, const Vec2& x, const Vec2& v,
            const CharacteristicsSolution& sol);

/// Landau damping initial condition; dim 2: (1/2π)e^{−|v|²/2}(1 + αcos(kx₁)
/// + αcos(kx₂)), dim 1 drops the x₂ term and uses the 1D Maxwellian.
double landau_f0(const Vec2& x, const Vec2& v, double alpha, double k, int dim);

/// One RK3 step of the unprojected Galerkin dynamics
///   Mₓ·Ḟ·Mᵥ = −Σ_k(Tx_k F Mv_kᵀ − Mx_E_k F Tv_kᵀ) − δ(Cx F Mᵥ + Mₓ F Cvᵀ)
///             + Σ_ν Mx_bnd F Mv_halfᵀ − Σ_{νμ} bx·bvᵀ
/// on dense coefficients F. Tiny meshes only (n_x·n_v ≤ 5000).
DenseMatrix full_galerkin_step(const DenseMatrix& F, const OperatorSet& ops,
                               InflowProvider* inflow, double t, double dt,
                               double delta);

}  // namespace dlrv
