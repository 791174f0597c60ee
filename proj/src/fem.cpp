#include "dlrv/fem.hpp"

#include <array>
#include <cmath>

#include "dlrv/errors.hpp"
#include "dlrv/quadrature.hpp"

namespace dlrv {

namespace {

struct ElementGeometry {
  int nv;                       // 2 or 3
  std::array<Vec2, 3> verts;
  std::array<int, 3> dofs;
  double measure;
  std::array<Vec2, 3> grads;    // P1 basis gradients (constant per element)

  Vec2 map_ref(const Vec2& xi) const {
    if (nv == 2) return verts[0] + xi.x() * (verts[1] - verts[0]);
    return verts[0] + xi.x() * (verts[1] - verts[0]) + xi.y() * (verts[2] - verts[0]);
  }
  // basis values at a reference point
  std::array<double, 3> basis_ref(const Vec2& xi) const {
    if (nv == 2) return {1.0 - xi.x(), xi.x(), 0.0};
    return {1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
  }
  // basis values at a physical point (used for clipped sub-cells)
  std::array<double, 3> basis_phys(const Vec2& p) const {
    if (nv == 2) {
      double h = verts[1].x() - verts[0].x();
      double xi = (p.x() - verts[0].x()) / h;
      return {1.0 - xi, xi, 0.0};
    }
    Vec2 d = p - verts[0];
    Vec2 u = verts[1] - verts[0], w = verts[2] - verts[0];
    double det = u.x() * w.y() - u.y() * w.x();
    double l1 = (d.x() * w.y() - d.y() * w.x()) / det;
    double l2 = (u.x() * d.y() - u.y() * d.x()) / det;
    return {1.0 - l1 - l2, l1, l2};
  }
};

ElementGeometry element_geometry(const Mesh& m, int e) {
  ElementGeometry g;
  g.nv = m.verts_per_elem();
  const auto& el = m.elements[e];
  for (int k = 0; k < g.nv; ++k) g.verts[k] = m.vertices[el[k]];
  g.dofs = m.element_dofs(e);
  g.measure = m.element_measure(e);
  if (g.nv == 2) {
    double h = g.verts[1].x() - g.verts[0].x();
    g.grads[0] = Vec2(-1.0 / h, 0.0);
    g.grads[1] = Vec2(1.0 / h, 0.0);
  } else {
    Vec2 u = g.verts[1] - g.verts[0], w = g.verts[2] - g.verts[0];
    double det = u.x() * w.y() - u.y() * w.x();
    // rows of J^{-T} applied to reference gradients (-1,-1),(1,0),(0,1)
    Vec2 g1(w.y() / det, -w.x() / det);
    Vec2 g2(-u.y() / det, u.x() / det);
    g.grads[0] = -g1 - g2;
    g.grads[1] = g1;
    g.grads[2] = g2;
  }
  return g;
}

SparseMatrix from_triplets(int n, std::vector<Triplet>& trip) {
  SparseMatrix A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// local exact P1 mass: h [[1/3,1/6],[1/6,1/3]] resp. |K|/12 [[2,1,1],...]
void add_local_mass(std::vector<Triplet>& trip, const ElementGeometry& g,
                    double scale) {
  if (g.nv == 2) {
    const double m[2][2] = {{1.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 1.0 / 3.0}};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        trip.emplace_back(g.dofs[i], g.dofs[j], scale * g.measure * m[i][j]);
  } else {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(g.dofs[i], g.dofs[j],
                          scale * g.measure / 12.0 * (i == j ? 2.0 : 1.0));
  }
}

// Clips a convex CCW polygon against {n·p <= 0}.
std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, const Vec2& n,
                                 double eps) {
  std::vector<Vec2> out;
  const int m = static_cast<int>(poly.size());
  for (int i = 0; i < m; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % m];
    double sp = n.dot(p), sq = n.dot(q);
    bool pin = sp <= eps, qin = sq <= eps;
    if (pin) out.push_back(p);
    if (pin != qin) {
      double t = sp / (sp - sq);
      t = std::min(1.0, std::max(0.0, t));
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

}  // namespace

SparseMatrix assemble_mass(const Mesh& mesh) {
  std::vector<Triplet> trip;
  for (int e = 0; e < mesh.n_elements(); ++e)
    add_local_mass(trip, element_geometry(mesh, e), 1.0);
  return from_triplets(mesh.n_dof, trip);
}

SparseMatrix assemble_mass(const Mesh& mesh,
                           const std::function<double(const Vec2&)>& weight,
                           int quad_degree) {
  const QuadRule& rule = element_rule(mesh.dim, quad_degree);
  const double ref_scale = mesh.dim == 1 ? 1.0 : 2.0;
  std::vector<Triplet> trip;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    ElementGeometry g = element_geometry(mesh, e);
    for (int q = 0; q < rule.size(); ++q) {
      Vec2 p = g.map_ref(rule.points[q]);
      double wq = ref_scale * g.measure * rule.weights[q] * weight(p);
      auto phi = g.basis_ref(rule.points[q]);
      for (int i = 0; i < g.nv; ++i)
        for (int j = 0; j < g.nv; ++j)
          trip.emplace_back(g.dofs[i], g.dofs[j], wq * phi[i] * phi[j]);
    }
  }
  return from_triplets(mesh.n_dof, trip);
}

SparseMatrix assemble_mass_pc(const Mesh& mesh, const std::vector<double>& w_elem) {
  if (static_cast<int>(w_elem.size()) != mesh.n_elements())
    throw InvalidArgument("assemble_mass_pc: weight size mismatch");
  std::vector<Triplet> trip;
  for (int e = 0; e < mesh.n_elements(); ++e)
    add_local_mass(trip, element_geometry(mesh, e), w_elem[e]);
  return from_triplets(mesh.n_dof, trip);
}

SparseMatrix assemble_transport(const Mesh& mesh, int k) {
  if (k < 0 || k >= mesh.dim)
    throw InvalidArgument("assemble_transport: direction out of range");
  std::vector<Triplet> trip;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    ElementGeometry g = element_geometry(mesh, e);
    // ∫ φ_i ∂_k φ_j = (∂_k φ_j) |K| / nv, gradient constant
    for (int i = 0; i < g.nv; ++i)
      for (int j = 0; j < g.nv; ++j)
        trip.emplace_back(g.dofs[i], g.dofs[j],
                          g.grads[j][k] * g.measure / g.nv);
  }
  return from_triplets(mesh.n_dof, trip);
}

SparseMatrix assemble_stiffness(const Mesh& mesh) {
  std::vector<Triplet> trip;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    ElementGeometry g = element_geometry(mesh, e);
    for (int i = 0; i < g.nv; ++i)
      for (int j = 0; j < g.nv; ++j)
        trip.emplace_back(g.dofs[i], g.dofs[j],
                          g.measure * g.grads[i].dot(g.grads[j]));
  }
  return from_triplets(mesh.n_dof, trip);
}

SparseMatrix assemble_boundary_mass(const Mesh& mesh, const BoundaryPiece& piece) {
  std::vector<Triplet> trip;
  for (const FacetRef& f : piece.facets) {
    auto fv = mesh.facet_vertices(f.elem, f.local);
    if (mesh.dim == 1) {
      trip.emplace_back(mesh.dof_map[fv[0]], mesh.dof_map[fv[0]], 1.0);
    } else {
      double h = mesh.facet_measure(f.elem, f.local);
      int d0 = mesh.dof_map[fv[0]], d1 = mesh.dof_map[fv[1]];
      trip.emplace_back(d0, d0, h / 3.0);
      trip.emplace_back(d1, d1, h / 3.0);
      trip.emplace_back(d0, d1, h / 6.0);
      trip.emplace_back(d1, d0, h / 6.0);
    }
  }
  return from_triplets(mesh.n_dof, trip);
}

SparseMatrix assemble_halfspace_mass(const Mesh& v_mesh, const Vec2& normal) {
  double nn = normal.head(v_mesh.dim == 1 ? 1 : 2).norm();
  if (!(nn > 1e-14))
    throw InvalidArgument("assemble_halfspace_mass: zero-length normal");

  const QuadRule& rule = element_rule(v_mesh.dim, 3);
  std::vector<Triplet> trip;
  double vscale = std::max(v_mesh.box_hi.cwiseAbs().maxCoeff(),
                           v_mesh.box_lo.cwiseAbs().maxCoeff());
  const double eps = 1e-13 * nn * std::max(vscale, 1.0);

  auto integrate_cell = [&](const ElementGeometry& g, const std::array<Vec2, 3>& cell,
                            int cell_nv) {
    // quadrature over a (sub-)cell, basis functions of the parent element
    double cm;
    if (cell_nv == 2) {
      cm = cell[1].x() - cell[0].x();
    } else {
      Vec2 u = cell[1] - cell[0], w = cell[2] - cell[0];
      cm = 0.5 * (u.x() * w.y() - u.y() * w.x());
    }
    if (std::abs(cm) < 1e-300) return;
    const double ref_scale = cell_nv == 2 ? 1.0 : 2.0;
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2& xi = rule.points[q];
      Vec2 p = cell_nv == 2
                   ? Vec2(cell[0] + xi.x() * (cell[1] - cell[0]))
                   : Vec2(cell[0] + xi.x() * (cell[1] - cell[0]) +
                          xi.y() * (cell[2] - cell[0]));
      double wq = ref_scale * cm * rule.weights[q] * normal.dot(p);
      auto phi = g.basis_phys(p);
      for (int i = 0; i < g.nv; ++i)
        for (int j = 0; j < g.nv; ++j)
          trip.emplace_back(g.dofs[i], g.dofs[j], wq * phi[i] * phi[j]);
    }
  };

  for (int e = 0; e < v_mesh.n_elements(); ++e) {
    ElementGeometry g = element_geometry(v_mesh, e);
    double smin = 1e300, smax = -1e300;
    for (int k = 0; k < g.nv; ++k) {
      double s = normal.dot(g.verts[k]);
      smin = std::min(smin, s);
      smax = std::max(smax, s);
    }
    if (smin >= -eps) continue;  // entirely in the outflow half-space
    if (smax <= eps) {
      // fully inside {n·v < 0}
      integrate_cell(g, g.verts, g.nv);
      continue;
    }
    if (v_mesh.dim == 1) {
      // sub-interval of {n·v <= 0}
      double x0 = g.verts[0].x(), x1 = g.verts[1].x();
      double nx = normal.x();
      double cut = 0.0;  // n·v = 0 at v = 0 (1D normal has no y part)
      double a = nx > 0 ? x0 : std::max(x0, cut);
      double b = nx > 0 ? std::min(x1, cut) : x1;
      if (b > a) integrate_cell(g, {Vec2(a, 0.0), Vec2(b, 0.0), Vec2::Zero()}, 2);
    } else {
      std::vector<Vec2> poly = {g.verts[0], g.verts[1], g.verts[2]};
      std::vector<Vec2> clipped = clip_halfplane(poly, normal, eps);
      // fan triangulation of the clipped convex polygon
      for (size_t i = 1; i + 1 < clipped.size(); ++i)
        integrate_cell(g, {clipped[0], clipped[i], clipped[i + 1]}, 3);
    }
  }
  return from_triplets(v_mesh.n_dof, trip);
}

SparseMatrix assemble_cip(const Mesh& mesh) {
  FacetTopology topo = build_facet_topology(mesh);
  std::vector<Triplet> trip;
  std::array<int, 6> dofs{};
  std::array<Vec2, 6> coef{};
  for (const auto& f : topo.facets) {
    if (!f.interior()) continue;
    double hF, areaF;
    if (mesh.dim == 1) {
      hF = 0.5 * (mesh.element_measure(f.a.elem) + mesh.element_measure(f.b.elem));
      areaF = 1.0;
    } else {
      hF = mesh.facet_measure(f.a.elem, f.a.local);
      areaF = hF;
    }
    // jump of the elementwise-constant gradient, expressed per dof
    int n = 0;
    auto accumulate = [&](int e, double sign) {
      ElementGeometry g = element_geometry(mesh, e);
      for (int k = 0; k < g.nv; ++k) {
        int d = g.dofs[k];
        int slot = -1;
        for (int s = 0; s < n; ++s)
          if (dofs[s] == d) slot = s;
        if (slot < 0) {
          slot = n++;
          dofs[slot] = d;
          coef[slot] = Vec2::Zero();
        }
        coef[slot] += sign * g.grads[k];
      }
    };
    accumulate(f.a.elem, 1.0);
    accumulate(f.b.elem, -1.0);
    double w = hF * hF * areaF;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        trip.emplace_back(dofs[i], dofs[j], w * coef[i].dot(coef[j]));
  }
  return from_triplets(mesh.n_dof, trip);
}

OperatorSet assemble_operator_set(const Mesh& x_mesh, const Mesh& v_mesh) {
  if (x_mesh.dim != v_mesh.dim)
    throw InvalidArgument("assemble_operator_set: dimension mismatch");
  if (!v_mesh.fully_periodic())
    throw InvalidArgument("assemble_operator_set: velocity mesh must be periodic");

  OperatorSet ops;
  ops.x_mesh = x_mesh;
  ops.v_mesh = v_mesh;
  ops.dim = x_mesh.dim;
  ops.n_x = x_mesh.n_dof;
  ops.n_v = v_mesh.n_dof;

  ops.Mx = assemble_mass(x_mesh);
  ops.Mv = assemble_mass(v_mesh);
  ops.Mx_chol = cholesky(ops.Mx);
  ops.Mv_chol = cholesky(ops.Mv);

  for (int k = 0; k < ops.dim; ++k) {
    ops.Tx.push_back(assemble_transport(x_mesh, k));
    ops.Tv.push_back(assemble_transport(v_mesh, k));
    ops.Mv_k.push_back(
        assemble_mass(v_mesh, [k](const Vec2& v) { return v[k]; }, 3));
    SparseMatrix zero(ops.n_x, ops.n_x);
    ops.Mx_E.push_back(zero);
  }
  ops.Mv_vsq = assemble_mass(
      v_mesh,
      [d = ops.dim](const Vec2& v) { return v.head(d).squaredNorm(); }, 4);

  for (const BoundaryPiece& p : x_mesh.boundary_pieces) {
    ops.Mx_bnd.push_back(assemble_boundary_mass(x_mesh, p));
    ops.Mv_half.push_back(assemble_halfspace_mass(v_mesh, p.normal));
  }
  ops.Cx = assemble_cip(x_mesh);
  ops.Cv = assemble_cip(v_mesh);
  return ops;
}

}  // namespace dlrv
