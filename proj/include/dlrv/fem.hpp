#pragma once

#include <functional>
#include <vector>

#include "dlrv/linalg.hpp"
#include "dlrv/mesh.hpp"

namespace dlrv {

/// All assembled discretization matrices for one x-mesh/v-mesh pair.
/// Everything is time-independent except Mx_E, which the field module
/// replaces wholesale between steps.
struct OperatorSet {
  Mesh x_mesh, v_mesh;
  int dim = 0;
  int n_x = 0, n_v = 0;

  SparseMatrix Mx, Mv;
  std::vector<SparseMatrix> Tx, Tv;      // transport, one per direction
  std::vector<SparseMatrix> Mv_k;        // v_k-weighted velocity mass
  std::vector<SparseMatrix> Mx_E;        // E_k-weighted spatial mass
  std::vector<SparseMatrix> Mx_bnd;      // boundary mass per piece
  std::vector<SparseMatrix> Mv_half;     // inflow half-space mass per piece
  SparseMatrix Cx, Cv;                   // CIP stabilization
  SparseMatrix Mv_vsq;                   // |v|²-weighted mass (diagnostics)
  CholeskyFactor Mx_chol, Mv_chol;

  int n_pieces() const { return static_cast<int>(Mx_bnd.size()); }
};

/// P1 mass matrix, exact.
SparseMatrix assemble_mass(const Mesh& mesh);

/// Weighted P1 mass ⟨φ_i, w φ_j⟩ by quadrature of the given degree
/// (degree 3 is exact for affine weights, 4 for quadratic ones).
SparseMatrix assemble_mass(const Mesh& mesh,
                           const std::function<double(const Vec2&)>& weight,
                           int quad_degree = 3);

/// Mass weighted by an elementwise-constant function, exact.
SparseMatrix assemble_mass_pc(const Mesh& mesh, const std::vector<double>& w_elem);

/// Transport matrix ⟨φ_i, ∂_k φ_j⟩, exact.
SparseMatrix assemble_transport(const Mesh& mesh, int k);

/// P1 stiffness matrix ⟨∇φ_i, ∇φ_j⟩, exact.
SparseMatrix assemble_stiffness(const Mesh& mesh);

/// Facet mass on a boundary piece: edge mass matrices in 2D, a unit point
/// evaluation in 1D.
SparseMatrix assemble_boundary_mass(const Mesh& mesh, const BoundaryPiece& piece);

/// Velocity mass weighted by n·v and restricted to the inflow half-space
/// {n·v < 0}: straddling elements are clipped exactly against the half-plane
/// and integrated over the clipped polygon. Symmetric negative semidefinite.
SparseMatrix assemble_halfspace_mass(const Mesh& v_mesh, const Vec2& normal);

/// Continuous interior penalty matrix: h_F² |F| jumps of the elementwise
/// gradient across interior (including periodic) facets. Symmetric PSD.
SparseMatrix assemble_cip(const Mesh& mesh);

/// Assembles every time-independent matrix and the mass factorizations;
/// Mx_E starts as zero matrices. Requires matching dimensions and a fully
/// periodic velocity mesh.
OperatorSet assemble_operator_set(const Mesh& x_mesh, const Mesh& v_mesh);

}  // namespace dlrv
