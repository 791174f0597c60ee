#pragma once

#include <functional>
#include <map>
#include <vector>

#include "dlrv/fem.hpp"
#include "dlrv/linalg.hpp"
#include "dlrv/mesh.hpp"

namespace dlrv {

/// Snapshot of boundary/initial data in separable form
/// g(x,v) = Σ_μ gx^(μ)(x)·gv^(μ)(v), as P1 coefficient vectors.
/// Zero terms means g ≡ 0.
struct SeparableFunction {
  double t = 0.0;
  std::vector<Vector> gx;
  std::vector<Vector> gv;
  int n_terms() const { return static_cast<int>(gx.size()); }
};

/// Precomputed per-piece inflow loads:
///   bx[ν][μ] = Mx_bnd[ν]·gx^(μ),  bv[ν][μ] = Mv_half[ν]·gv^(μ).
/// The weight n·v and the restriction to the inflow half-space live in
/// Mv_half.
struct InflowAssembly {
  std::vector<std::vector<Vector>> bx;
  std::vector<std::vector<Vector>> bv;
  int n_terms = 0;
  int n_x = 0, n_v = 0;
  bool empty() const { return n_terms == 0 || bx.empty(); }
};

/// One separable factor of the analytic data: (t, x_k, v_k) -> value.
using FactorFn = std::function<double(double, double, double)>;

/// Samples analytic data given as per-direction 2D factors
/// g = Π_k f_k(t, x_k, v_k) into a SeparableFunction on the mesh nodes:
/// each factor is sampled on (x-dof coordinates) × (distinct v_k values) and
/// SVD-truncated to max_terms; the Kronecker combination of the factor
/// expansions keeps every σ1·σ2 product above a 1e-12 relative floor, in
/// decreasing order (term count ≤ max_terms²).
SeparableFunction sample_separable(const std::vector<FactorFn>& factors, double t,
                                   const Mesh& x_mesh, const Mesh& v_mesh,
                                   int max_terms);

InflowAssembly assemble_inflow(const SeparableFunction& g, const OperatorSet& ops);

/// 𝖦ₓ(t) = Σ_{ν,μ} bx[ν,μ]·(bv[ν,μ]ᵀ·V), an n_x×r matrix.
DenseMatrix gx_matrix(const InflowAssembly& a, const DenseMatrix& V);

/// 𝖦ᵥ(t) = Σ_{ν,μ} bv[ν,μ]·(bx[ν,μ]ᵀ·X), an n_v×r matrix.
DenseMatrix gv_matrix(const InflowAssembly& a, const DenseMatrix& X);

/// G_S = Σ_{ν,μ} (Xᵀbx[ν,μ])·(Vᵀbv[ν,μ])ᵀ.
DenseMatrix gs_matrix(const InflowAssembly& a, const DenseMatrix& X,
                      const DenseMatrix& V);

/// Supplies inflow assemblies at the RK stage times of a step. Assemblies
/// are cached per stage time; the cache is reset at every step start.
class InflowProvider {
 public:
  virtual ~InflowProvider() = default;
  virtual void begin_step(double /*t0*/) {}
  /// nullptr means no inflow.
  virtual const InflowAssembly* assembly_at(double t) = 0;
};

/// Inflow data from analytic separable factors, re-sampled at every stage
/// time; freeze_at_step_start instead samples once per step at t0.
class AnalyticInflow : public InflowProvider {
 public:
  AnalyticInflow(std::vector<FactorFn> factors, const OperatorSet& ops,
                 int max_terms, bool freeze_at_step_start = false);

  void begin_step(double t0) override;
  const InflowAssembly* assembly_at(double t) override;

 private:
  std::vector<FactorFn> factors_;
  const OperatorSet& ops_;
  int max_terms_;
  bool freeze_;
  double t0_ = 0.0;
  std::map<double, InflowAssembly> cache_;
};

}  // namespace dlrv
