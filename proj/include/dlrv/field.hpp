#pragma once

#include <memory>

#include "dlrv/fem.hpp"
#include "dlrv/linalg.hpp"
#include "dlrv/mesh.hpp"

namespace dlrv {

/// Piecewise-constant electric field over the x-mesh, E|_K = -∇Φʰ|_K,
/// or a prescribed constant field.
struct ElectricField {
  std::vector<Vec2> per_element;
  bool constant_mode = false;
  Vec2 constant = Vec2::Zero();
};

ElectricField constant_field(const Mesh& x_mesh, const Vec2& E);

/// P1 coefficient vector of ρʰ = ρ_b − ∫ fʰ dv for fʰ = X·S·Vᵀ.
Vector compute_density(const DenseMatrix& X, const DenseMatrix& S,
                       const DenseMatrix& V, const SparseMatrix& Mv, double rho_b);

/// Poisson solver −ΔΦ = ρ on a fully periodic mesh with the mean-zero gauge
/// enforced by one Lagrange multiplier row. The factorization is computed
/// once and reused across solves.
class PoissonSolver {
 public:
  explicit PoissonSolver(const Mesh& x_mesh);
  /// Returns the mean-zero potential; ρ is compatibility-corrected first.
  Vector solve(const Vector& rho) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// One-shot convenience wrapper around PoissonSolver.
Vector solve_poisson(const Mesh& x_mesh, const Vector& rho);

ElectricField compute_e_field(const Mesh& x_mesh, const Vector& phi);

/// ½ Σ_K |E|_K|² |K|
double electric_energy(const ElectricField& E, const Mesh& x_mesh);

/// Rebuilds the field-weighted mass matrices Mx_E from the current field.
void update_field_matrices(OperatorSet& ops, const ElectricField& E);

}  // namespace dlrv
