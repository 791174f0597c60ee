#pragma once

#include <Eigen/Dense>

#include <array>
#include <string_view>
#include <vector>

#include "dlrv/linalg.hpp"

namespace dlrv {

using Vec2 = Eigen::Vector2d;

struct FacetRef {
  int elem = -1;
  int local = -1;  // 1D: endpoint index {0,1}; 2D: edge (local, local+1 mod 3)
};

/// Flat boundary part Γ^(ν) with a constant outward unit normal.
struct BoundaryPiece {
  int id = 0;
  Vec2 normal = Vec2::Zero();
  std::vector<FacetRef> facets;
};

/// Simplicial mesh (intervals or triangles) with optional periodic
/// identification. Vertices are the raw geometric points; dof_map collapses
/// periodically identified vertices onto shared degrees of freedom.
/// Immutable after construction.
struct Mesh {
  int dim = 1;
  std::vector<Vec2> vertices;                // y-component 0 in 1D
  std::vector<std::array<int, 3>> elements;  // third index -1 in 1D
  std::vector<int> dof_map;                  // vertex -> dof
  int n_dof = 0;
  std::vector<BoundaryPiece> boundary_pieces;
  std::array<bool, 2> periodic{false, false};
  Vec2 box_lo = Vec2::Zero();
  Vec2 box_hi = Vec2::Zero();

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_elements() const { return static_cast<int>(elements.size()); }
  int verts_per_elem() const { return dim == 1 ? 2 : 3; }
  bool fully_periodic() const {
    return periodic[0] && (dim == 1 || periodic[1]);
  }

  double element_measure(int e) const;
  std::array<int, 3> element_dofs(int e) const;
  /// Outward unit normal of a facet of element e (CCW orientation in 2D).
  Vec2 facet_normal(int e, int local) const;
  double facet_measure(int e, int local) const;  // 1 in 1D, edge length in 2D
  std::array<int, 2> facet_vertices(int e, int local) const;  // second -1 in 1D
  Vec2 facet_midpoint(int e, int local) const;

  /// Coordinates of the representative vertex of a dof (first vertex mapped
  /// to it); used to sample pointwise data into coefficient vectors.
  Vec2 dof_point(int dof) const;
  const std::vector<int>& dof_representatives() const { return dof_rep_; }

  double total_measure() const;

  /// Coordinate matching tolerance per direction: 1e-9 · box extent.
  Vec2 match_tol() const;
  /// Wraps a point onto its canonical periodic image (upper faces -> lower).
  Vec2 canonical_point(const Vec2& p) const;

  std::vector<int> dof_rep_;  // dof -> representative vertex
};

/// Facet adjacency: every geometric facet with its one (boundary) or two
/// (interior, including periodic wrap-around) incident element facets.
struct FacetTopology {
  struct Facet {
    FacetRef a;
    FacetRef b;  // elem = -1 when boundary
    bool interior() const { return b.elem >= 0; }
  };
  std::vector<Facet> facets;
};

FacetTopology build_facet_topology(const Mesh& mesh);

/// n uniform elements on [a, b]; periodic identifies the endpoint dofs,
/// otherwise two single-point boundary pieces with normals -1 / +1.
Mesh build_interval_mesh(double a, double b, int n, bool periodic);

/// nx·ny cells split into triangle pairs along the lower-left/upper-right
/// diagonal; per-direction periodic identification; non-periodic directions
/// contribute axis-aligned boundary pieces.
Mesh build_rect_tri_mesh(const Vec2& x_range, const Vec2& y_range, int nx, int ny,
                         std::array<bool, 2> periodic);

/// Parses the line-oriented mesh text format:
///   dim n_vert n_elem n_bfacet
///   <n_vert coordinate lines> <n_elem 0-based vertex index lines>
///   <n_bfacet lines: elem local_facet piece_id>
/// '#' starts a comment. Validates conformity, orientation, and that facets
/// of one piece share a single normal.
Mesh load_polygon_mesh(std::string_view text);

/// Splits every interval in 2 / every triangle in 4 via edge midpoints.
/// Boundary piece ids, normals and periodic identification are preserved.
/// When prolongation is given, it receives the P1 interpolation operator
/// from coarse to fine dofs.
Mesh refine_uniform(const Mesh& mesh, SparseMatrix* prolongation = nullptr);

}  // namespace dlrv
