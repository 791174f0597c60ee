#include "dlrv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <unordered_map>

#include "dlrv/errors.hpp"

namespace dlrv {

namespace {

// Groups points that coincide within a per-direction tolerance. Quantized
// cell hashing with neighbor lookup, robust to points near cell borders.
class PointMatcher {
 public:
  explicit PointMatcher(const Vec2& tol) : tol_(tol) {}

  // Returns the payload of an existing matching point, or -1 after
  // inserting the point with the given payload.
  int find_or_insert(const Vec2& p, int payload) {
    const std::int64_t cx = cell(p.x(), 0);
    const std::int64_t cy = cell(p.y(), 1);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (int idx : it->second) {
          const Vec2& q = points_[idx];
          if (std::abs(q.x() - p.x()) <= tol_.x() &&
              std::abs(q.y() - p.y()) <= tol_.y())
            return payloads_[idx];
        }
      }
    }
    cells_[key(cx, cy)].push_back(static_cast<int>(points_.size()));
    points_.push_back(p);
    payloads_.push_back(payload);
    return -1;
  }

 private:
  std::int64_t cell(double c, int k) const {
    double t = std::max(tol_[k], 1e-300);
    return static_cast<std::int64_t>(std::floor(c / t));
  }
  static std::uint64_t key(std::int64_t a, std::int64_t b) {
    return static_cast<std::uint64_t>(a) * 0x9E3779B97F4A7C15ull ^
           static_cast<std::uint64_t>(b);
  }

  Vec2 tol_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
  std::vector<Vec2> points_;
  std::vector<int> payloads_;
};

void compute_box(Mesh& m) {
  if (m.vertices.empty()) throw MeshError("mesh has no vertices");
  Vec2 lo = m.vertices[0], hi = m.vertices[0];
  for (const Vec2& v : m.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  m.box_lo = lo;
  m.box_hi = hi;
}

// Builds dof_map by canonical coordinate matching (collapses periodic pairs)
// and records one representative vertex per dof.
void finalize_dofs(Mesh& m) {
  PointMatcher matcher(m.match_tol());
  m.dof_map.assign(m.vertices.size(), -1);
  m.dof_rep_.clear();
  for (int v = 0; v < m.n_vertices(); ++v) {
    Vec2 c = m.canonical_point(m.vertices[v]);
    int next = static_cast<int>(m.dof_rep_.size());
    int hit = matcher.find_or_insert(c, next);
    if (hit < 0) {
      m.dof_map[v] = next;
      m.dof_rep_.push_back(v);
    } else {
      m.dof_map[v] = hit;
    }
  }
  m.n_dof = static_cast<int>(m.dof_rep_.size());
  if (!m.periodic[0] && !m.periodic[1] && m.n_dof != m.n_vertices())
    throw MeshError("mesh has geometrically duplicate vertices");
}

void validate_elements(const Mesh& m) {
  for (int e = 0; e < m.n_elements(); ++e) {
    for (int k = 0; k < m.verts_per_elem(); ++k) {
      int v = m.elements[e][k];
      if (v < 0 || v >= m.n_vertices())
        throw MeshError("element " + std::to_string(e) +
                        " references invalid vertex " + std::to_string(v));
    }
    if (!(m.element_measure(e) > 0.0))
      throw MeshError("element " + std::to_string(e) +
                      " is inverted or degenerate");
  }
}

}  // namespace

double Mesh::element_measure(int e) const {
  const auto& el = elements[e];
  if (dim == 1) return vertices[el[1]].x() - vertices[el[0]].x();
  Vec2 u = vertices[el[1]] - vertices[el[0]];
  Vec2 w = vertices[el[2]] - vertices[el[0]];
  return 0.5 * (u.x() * w.y() - u.y() * w.x());
}

std::array<int, 3> Mesh::element_dofs(int e) const {
  const auto& el = elements[e];
  if (dim == 1) return {dof_map[el[0]], dof_map[el[1]], -1};
  return {dof_map[el[0]], dof_map[el[1]], dof_map[el[2]]};
}

Vec2 Mesh::facet_normal(int e, int local) const {
  if (dim == 1) return local == 0 ? Vec2(-1.0, 0.0) : Vec2(1.0, 0.0);
  const auto& el = elements[e];
  Vec2 p = vertices[el[local]];
  Vec2 q = vertices[el[(local + 1) % 3]];
  Vec2 t = q - p;
  double len = t.norm();
  return Vec2(t.y() / len, -t.x() / len);
}

double Mesh::facet_measure(int e, int local) const {
  if (dim == 1) return 1.0;
  auto fv = facet_vertices(e, local);
  return (vertices[fv[1]] - vertices[fv[0]]).norm();
}

std::array<int, 2> Mesh::facet_vertices(int e, int local) const {
  const auto& el = elements[e];
  if (dim == 1) return {el[local], -1};
  return {el[local], el[(local + 1) % 3]};
}

Vec2 Mesh::facet_midpoint(int e, int local) const {
  auto fv = facet_vertices(e, local);
  if (dim == 1) return vertices[fv[0]];
  return 0.5 * (vertices[fv[0]] + vertices[fv[1]]);
}

Vec2 Mesh::dof_point(int dof) const { return vertices[dof_rep_[dof]]; }

double Mesh::total_measure() const {
  double s = 0.0;
  for (int e = 0; e < n_elements(); ++e) s += element_measure(e);
  return s;
}

Vec2 Mesh::match_tol() const {
  Vec2 ext = box_hi - box_lo;
  double fallback = 1e-9 * std::max(ext.x(), std::max(ext.y(), 1.0));
  return Vec2(ext.x() > 0 ? 1e-9 * ext.x() : fallback,
              ext.y() > 0 ? 1e-9 * ext.y() : fallback);
}

Vec2 Mesh::canonical_point(const Vec2& p) const {
  Vec2 c = p;
  Vec2 tol = match_tol();
  for (int k = 0; k < dim; ++k)
    if (periodic[k] && std::abs(c[k] - box_hi[k]) <= tol[k]) c[k] = box_lo[k];
  return c;
}

FacetTopology build_facet_topology(const Mesh& mesh) {
  // Facets are keyed by the canonical image of their midpoint: wrap-around
  // facets of periodic meshes land on the same key, facets that merely touch
  // the seam do not.
  PointMatcher matcher(mesh.match_tol());
  FacetTopology topo;
  const int nf = mesh.dim == 1 ? 2 : 3;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    for (int l = 0; l < nf; ++l) {
      Vec2 key = mesh.canonical_point(mesh.facet_midpoint(e, l));
      int idx = static_cast<int>(topo.facets.size());
      int hit = matcher.find_or_insert(key, idx);
      if (hit < 0) {
        topo.facets.push_back({{e, l}, {-1, -1}});
      } else {
        auto& f = topo.facets[hit];
        if (f.interior())
          throw MeshError("non-conforming mesh: facet " + std::to_string(l) +
                          " of element " + std::to_string(e) +
                          " shared by more than two elements");
        f.b = {e, l};
      }
    }
  }
  return topo;
}

Mesh build_interval_mesh(double a, double b, int n, bool periodic) {
  if (!std::isfinite(a) || !std::isfinite(b))
    throw InvalidArgument("build_interval_mesh: non-finite bounds");
  if (!(a < b)) throw InvalidArgument("build_interval_mesh: requires a < b");
  if (n < 1) throw InvalidArgument("build_interval_mesh: n must be >= 1");

  Mesh m;
  m.dim = 1;
  m.periodic = {periodic, false};
  const double h = (b - a) / n;
  m.vertices.reserve(n + 1);
  for (int i = 0; i <= n; ++i)
    m.vertices.emplace_back(i == n ? b : a + i * h, 0.0);
  for (int i = 0; i < n; ++i) m.elements.push_back({i, i + 1, -1});
  compute_box(m);
  finalize_dofs(m);
  validate_elements(m);
  if (!periodic) {
    m.boundary_pieces.push_back({0, Vec2(-1.0, 0.0), {{0, 0}}});
    m.boundary_pieces.push_back({1, Vec2(1.0, 0.0), {{n - 1, 1}}});
  }
  return m;
}

Mesh build_rect_tri_mesh(const Vec2& x_range, const Vec2& y_range, int nx, int ny,
                         std::array<bool, 2> periodic) {
  for (const Vec2& r : {x_range, y_range}) {
    if (!r.allFinite() || !(r[0] < r[1]))
      throw InvalidArgument("build_rect_tri_mesh: degenerate range");
  }
  if (nx < 1 || ny < 1)
    throw InvalidArgument("build_rect_tri_mesh: resolutions must be >= 1");

  Mesh m;
  m.dim = 2;
  m.periodic = periodic;
  const double hx = (x_range[1] - x_range[0]) / nx;
  const double hy = (y_range[1] - y_range[0]) / ny;
  auto vidx = [nx](int i, int j) { return i + j * (nx + 1); };
  for (int j = 0; j <= ny; ++j) {
    double y = j == ny ? y_range[1] : y_range[0] + j * hy;
    for (int i = 0; i <= nx; ++i) {
      double x = i == nx ? x_range[1] : x_range[0] + i * hx;
      m.vertices.emplace_back(x, y);
    }
  }
  // fixed lower-left/upper-right diagonal keeps the mesh deterministic
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int a = vidx(i, j), b = vidx(i + 1, j), c = vidx(i + 1, j + 1),
          d = vidx(i, j + 1);
      m.elements.push_back({a, b, c});
      m.elements.push_back({a, c, d});
    }
  }
  compute_box(m);
  finalize_dofs(m);
  validate_elements(m);

  auto cell = [nx](int i, int j) { return 2 * (i + j * nx); };
  int next_id = 0;
  if (!periodic[0]) {
    BoundaryPiece left{next_id++, Vec2(-1.0, 0.0), {}};
    BoundaryPiece right{next_id++, Vec2(1.0, 0.0), {}};
    for (int j = 0; j < ny; ++j) {
      left.facets.push_back({cell(0, j) + 1, 2});
      right.facets.push_back({cell(nx - 1, j), 1});
    }
    m.boundary_pieces.push_back(std::move(left));
    m.boundary_pieces.push_back(std::move(right));
  }
  if (!periodic[1]) {
    BoundaryPiece bottom{next_id++, Vec2(0.0, -1.0), {}};
    BoundaryPiece top{next_id++, Vec2(0.0, 1.0), {}};
    for (int i = 0; i < nx; ++i) {
      bottom.facets.push_back({cell(i, 0), 0});
      top.facets.push_back({cell(i, ny - 1) + 1, 1});
    }
    m.boundary_pieces.push_back(std::move(bottom));
    m.boundary_pieces.push_back(std::move(top));
  }
  return m;
}

Mesh load_polygon_mesh(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
  }
  size_t pos = 0;
  auto next_int = [&](const char* what) {
    if (pos >= tokens.size())
      throw MeshError(std::string("mesh file: unexpected end while reading ") + what);
    try {
      return std::stoi(tokens[pos++]);
    } catch (const std::exception&) {
      throw MeshError(std::string("mesh file: invalid integer for ") + what +
                      ": '" + tokens[pos - 1] + "'");
    }
  };
  auto next_double = [&](const char* what) {
    if (pos >= tokens.size())
      throw MeshError(std::string("mesh file: unexpected end while reading ") + what);
    try {
      return std::stod(tokens[pos++]);
    } catch (const std::exception&) {
      throw MeshError(std::string("mesh file: invalid number for ") + what +
                      ": '" + tokens[pos - 1] + "'");
    }
  };

  Mesh m;
  m.dim = next_int("dim");
  if (m.dim != 1 && m.dim != 2) throw MeshError("mesh file: dim must be 1 or 2");
  const int nv = next_int("n_vert");
  const int ne = next_int("n_elem");
  const int nb = next_int("n_bfacet");
  if (nv < m.dim + 1 || ne < 1) throw MeshError("mesh file: empty mesh");

  for (int v = 0; v < nv; ++v) {
    double x = next_double("vertex coordinate");
    double y = m.dim == 2 ? next_double("vertex coordinate") : 0.0;
    m.vertices.emplace_back(x, y);
  }
  const int vpe = m.dim == 1 ? 2 : 3;
  for (int e = 0; e < ne; ++e) {
    std::array<int, 3> el{-1, -1, -1};
    for (int k = 0; k < vpe; ++k) el[k] = next_int("element vertex index");
    m.elements.push_back(el);
  }
  compute_box(m);
  finalize_dofs(m);
  validate_elements(m);

  FacetTopology topo = build_facet_topology(m);
  std::map<std::pair<int, int>, int> facet_lookup;  // (elem, local) -> topo idx
  std::vector<bool> assigned(topo.facets.size(), false);
  for (int i = 0; i < static_cast<int>(topo.facets.size()); ++i) {
    const auto& f = topo.facets[i];
    facet_lookup[{f.a.elem, f.a.local}] = i;
    if (f.interior()) facet_lookup[{f.b.elem, f.b.local}] = i;
  }

  std::map<int, BoundaryPiece> pieces;
  for (int k = 0; k < nb; ++k) {
    int e = next_int("boundary facet element");
    int l = next_int("boundary facet local index");
    int id = next_int("boundary facet piece id");
    if (e < 0 || e >= ne || l < 0 || l >= (m.dim == 1 ? 2 : 3))
      throw MeshError("boundary facet " + std::to_string(k) +
                      ": invalid element/local index");
    auto it = facet_lookup.find({e, l});
    if (it == facet_lookup.end() || topo.facets[it->second].interior())
      throw MeshError("boundary facet " + std::to_string(k) + " (element " +
                      std::to_string(e) + ", local " + std::to_string(l) +
                      ") is not on the mesh boundary");
    if (assigned[it->second])
      throw MeshError("boundary facet " + std::to_string(k) +
                      " listed in more than one piece");
    assigned[it->second] = true;
    Vec2 n = m.facet_normal(e, l);
    auto [pit, fresh] = pieces.try_emplace(id, BoundaryPiece{id, n, {}});
    if (!fresh && (pit->second.normal - n).norm() > 1e-12)
      throw MeshError("boundary facet " + std::to_string(k) + " of piece " +
                      std::to_string(id) + " has inconsistent normal");
    pit->second.facets.push_back({e, l});
  }
  for (int i = 0; i < static_cast<int>(topo.facets.size()); ++i) {
    if (!topo.facets[i].interior() && !assigned[i])
      throw MeshError("boundary facet of element " +
                      std::to_string(topo.facets[i].a.elem) + " (local " +
                      std::to_string(topo.facets[i].a.local) +
                      ") not assigned to any piece");
  }
  for (auto& [id, p] : pieces) m.boundary_pieces.push_back(std::move(p));
  return m;
}

Mesh refine_uniform(const Mesh& mesh, SparseMatrix* prolongation) {
  Mesh f;
  f.dim = mesh.dim;
  f.periodic = mesh.periodic;
  f.vertices = mesh.vertices;

  // midpoint vertex per undirected edge; fine vertex index per (coarse) edge
  std::map<std::pair<int, int>, int> edge_mid;
  auto midpoint = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = edge_mid.find(key);
    if (it != edge_mid.end()) return it->second;
    int idx = static_cast<int>(f.vertices.size());
    f.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    edge_mid[key] = idx;
    return idx;
  };

  if (mesh.dim == 1) {
    for (int e = 0; e < mesh.n_elements(); ++e) {
      int a = mesh.elements[e][0], b = mesh.elements[e][1];
      int mid = midpoint(a, b);
      f.elements.push_back({a, mid, -1});
      f.elements.push_back({mid, b, -1});
    }
  } else {
    for (int e = 0; e < mesh.n_elements(); ++e) {
      auto [a, b, c] = mesh.elements[e];
      int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      f.elements.push_back({a, ab, ca});
      f.elements.push_back({b, bc, ab});
      f.elements.push_back({c, ca, bc});
      f.elements.push_back({ab, bc, ca});
    }
  }
  f.box_lo = mesh.box_lo;
  f.box_hi = mesh.box_hi;
  finalize_dofs(f);
  validate_elements(f);

  // child facets covering each parent boundary facet
  for (const BoundaryPiece& p : mesh.boundary_pieces) {
    BoundaryPiece fp{p.id, p.normal, {}};
    for (const FacetRef& fr : p.facets) {
      if (mesh.dim == 1) {
        fp.facets.push_back({2 * fr.elem + fr.local, fr.local});
      } else {
        // parent edge l splits into (child l, facet 0) and (child l+1, facet 2)
        fp.facets.push_back({4 * fr.elem + fr.local, 0});
        fp.facets.push_back({4 * fr.elem + (fr.local + 1) % 3, 2});
      }
    }
    f.boundary_pieces.push_back(std::move(fp));
  }

  if (prolongation) {
    std::vector<Triplet> trip;
    std::vector<bool> written(f.n_dof, false);
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      int fd = f.dof_map[v];
      if (written[fd]) continue;
      written[fd] = true;
      trip.emplace_back(fd, mesh.dof_map[v], 1.0);
    }
    for (const auto& [edge, mv] : edge_mid) {
      int fd = f.dof_map[mv];
      if (written[fd]) continue;
      written[fd] = true;
      trip.emplace_back(fd, mesh.dof_map[edge.first], 0.5);
      trip.emplace_back(fd, mesh.dof_map[edge.second], 0.5);
    }
    prolongation->resize(f.n_dof, mesh.n_dof);
    prolongation->setFromTriplets(trip.begin(), trip.end());
  }
  return f;
}

}  // namespace dlrv
