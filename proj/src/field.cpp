#include "dlrv/field.hpp"

#include <Eigen/SparseLU>

#include "dlrv/errors.hpp"

namespace dlrv {

ElectricField constant_field(const Mesh& x_mesh, const Vec2& E) {
  ElectricField f;
  f.constant_mode = true;
  f.constant = E;
  f.per_element.assign(x_mesh.n_elements(), E);
  return f;
}

Vector compute_density(const DenseMatrix& X, const DenseMatrix& S,
                       const DenseMatrix& V, const SparseMatrix& Mv, double rho_b) {
  if (X.cols() != S.rows() || S.cols() != V.cols() || Mv.rows() != V.rows())
    throw InvalidArgument("compute_density: dimension mismatch");
  // ∫ V_j dv = (Mv·1)ᵀ V, nodal density = ρ_b − X S (Vᵀ Mv 1)
  Vector wv = Mv * Vector::Ones(Mv.rows());
  Vector integrated = X * (S * (V.transpose() * wv));
  return Vector::Constant(X.rows(), rho_b) - integrated;
}

struct PoissonSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  SparseMatrix Mx;
  Vector m;  // Mx·1
  double measure = 0.0;
  int n = 0;
};

PoissonSolver::PoissonSolver(const Mesh& x_mesh) {
  if (!x_mesh.fully_periodic())
    throw GaugeViolation(
        "solve_poisson: only fully periodic spatial meshes are supported");
  auto impl = std::make_shared<Impl>();
  impl->n = x_mesh.n_dof;
  SparseMatrix A = assemble_stiffness(x_mesh);
  impl->Mx = assemble_mass(x_mesh);
  impl->m = impl->Mx * Vector::Ones(impl->n);
  impl->measure = impl->m.sum();

  // bordered system [[A, m], [mᵀ, 0]] enforcing the zero-mean gauge
  std::vector<Triplet> trip;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
  for (int i = 0; i < impl->n; ++i) {
    trip.emplace_back(i, impl->n, impl->m[i]);
    trip.emplace_back(impl->n, i, impl->m[i]);
  }
  Eigen::SparseMatrix<double> B(impl->n + 1, impl->n + 1);
  B.setFromTriplets(trip.begin(), trip.end());
  impl->lu.compute(B);
  if (impl->lu.info() != Eigen::Success)
    throw GaugeViolation("solve_poisson: gauged system is singular");
  impl_ = std::move(impl);
}

Vector PoissonSolver::solve(const Vector& rho) const {
  if (rho.size() != impl_->n)
    throw InvalidArgument("solve_poisson: density size mismatch");
  // compatibility: remove the mean of ρ, rhs = Mx·ρ − mean·(Mx·1)
  double mean = impl_->m.dot(rho) / impl_->measure;
  Vector b(impl_->n + 1);
  b.head(impl_->n) = impl_->Mx * rho - mean * impl_->m;
  b[impl_->n] = 0.0;
  Vector sol = impl_->lu.solve(b);
  return sol.head(impl_->n);
}

Vector solve_poisson(const Mesh& x_mesh, const Vector& rho) {
  return PoissonSolver(x_mesh).solve(rho);
}

ElectricField compute_e_field(const Mesh& x_mesh, const Vector& phi) {
  if (phi.size() != x_mesh.n_dof)
    throw InvalidArgument("compute_e_field: potential size mismatch");
  ElectricField f;
  f.per_element.reserve(x_mesh.n_elements());
  for (int e = 0; e < x_mesh.n_elements(); ++e) {
    auto dofs = x_mesh.element_dofs(e);
    Vec2 grad = Vec2::Zero();
    if (x_mesh.dim == 1) {
      double h = x_mesh.element_measure(e);
      grad.x() = (phi[dofs[1]] - phi[dofs[0]]) / h;
    } else {
      const auto& el = x_mesh.elements[e];
      Vec2 u = x_mesh.vertices[el[1]] - x_mesh.vertices[el[0]];
      Vec2 w = x_mesh.vertices[el[2]] - x_mesh.vertices[el[0]];
      double det = u.x() * w.y() - u.y() * w.x();
      Vec2 g1(w.y() / det, -w.x() / det);
      Vec2 g2(-u.y() / det, u.x() / det);
      grad = phi[dofs[0]] * (-g1 - g2) + phi[dofs[1]] * g1 + phi[dofs[2]] * g2;
    }
    f.per_element.push_back(-grad);
  }
  return f;
}

double electric_energy(const ElectricField& E, const Mesh& x_mesh) {
  double s = 0.0;
  for (int e = 0; e < x_mesh.n_elements(); ++e)
    s += E.per_element[e].squaredNorm() * x_mesh.element_measure(e);
  return 0.5 * s;
}

void update_field_matrices(OperatorSet& ops, const ElectricField& E) {
  if (static_cast<int>(E.per_element.size()) != ops.x_mesh.n_elements())
    throw InvalidArgument("update_field_matrices: field size mismatch");
  std::vector<double> w(E.per_element.size());
  for (int k = 0; k < ops.dim; ++k) {
    for (size_t e = 0; e < w.size(); ++e) w[e] = E.per_element[e][k];
    ops.Mx_E[k] = assemble_mass_pc(ops.x_mesh, w);
  }
}

}  // namespace dlrv
