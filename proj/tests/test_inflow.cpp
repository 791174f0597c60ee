#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dlrv/errors.hpp"
#include "dlrv/inflow.hpp"
#include "dlrv/oracle.hpp"
#include "dlrv/scenario.hpp"

using namespace dlrv;

namespace {

std::mt19937 rng(4242);

DenseMatrix random_matrix(int r, int c) {
  std::normal_distribution<double> d(0.0, 1.0);
  DenseMatrix M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = d(rng);
  return M;
}

// ---- independent quadrature oracle ---------------------------------------
// Integrates n·v · a(v) · b(v) (a, b P1 interpolants) over one triangle
// clipped against {n·v < 0}: candidate points (inside vertices and edge-line
// crossings) are angle-sorted into a convex polygon, fanned, and each piece
// is integrated by Duffy-transformed 8x8 Gauss. This shares no code with the
// assembly path.
double gauss8_x[8] = {-0.9602898564975363, -0.7966664774136267,
                      -0.5255324099163290, -0.1834346424956498,
                      0.1834346424956498,  0.5255324099163290,
                      0.7966664774136267,  0.9602898564975363};
double gauss8_w[8] = {0.1012285362903763, 0.2223810344533745,
                      0.3137066458778873, 0.3626837833783620,
                      0.3626837833783620, 0.3137066458778873,
                      0.2223810344533745, 0.1012285362903763};

double integrate_tri(const Vec2& A, const Vec2& B, const Vec2& C,
                     const std::function<double(const Vec2&)>& f) {
  double area2 = (B.x() - A.x()) * (C.y() - A.y()) - (B.y() - A.y()) * (C.x() - A.x());
  double sum = 0.0;
  for (int p = 0; p < 8; ++p) {
    double u = 0.5 * (gauss8_x[p] + 1.0);
    for (int q = 0; q < 8; ++q) {
      double v = 0.5 * (gauss8_x[q] + 1.0) * (1.0 - u);
      double jac = 0.25 * (1.0 - u);
      sum += gauss8_w[p] * gauss8_w[q] * jac * f(A + u * (B - A) + v * (C - A));
    }
  }
  return sum * area2;
}

double clipped_halfspace_integral(const Mesh& vm, int elem, const Vec2& n,
                                  const std::function<double(const Vec2&)>& f) {
  std::array<Vec2, 3> tv;
  for (int k = 0; k < 3; ++k) tv[k] = vm.vertices[vm.elements[elem][k]];
  std::vector<Vec2> pts;
  const double eps = 1e-13;
  for (int k = 0; k < 3; ++k)
    if (n.dot(tv[k]) <= eps) pts.push_back(tv[k]);
  for (int k = 0; k < 3; ++k) {
    const Vec2 &p = tv[k], &q = tv[(k + 1) % 3];
    double sp = n.dot(p), sq = n.dot(q);
    if ((sp < -eps && sq > eps) || (sp > eps && sq < -eps))
      pts.push_back(p + sp / (sp - sq) * (q - p));
  }
  if (pts.size() < 3) return 0.0;
  Vec2 cen = Vec2::Zero();
  for (const Vec2& p : pts) cen += p;
  cen /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Vec2& a, const Vec2& b) {
    return std::atan2(a.y() - cen.y(), a.x() - cen.x()) <
           std::atan2(b.y() - cen.y(), b.x() - cen.x());
  });
  double sum = 0.0;
  for (size_t i = 1; i + 1 < pts.size(); ++i)
    sum += integrate_tri(pts[0], pts[i], pts[i + 1], f);
  return sum;
}

// P1 evaluation of a coefficient vector at an arbitrary point of an element
double p1_eval(const Mesh& m, int elem, const Vector& coeff, const Vec2& p) {
  std::array<Vec2, 3> tv;
  auto dofs = m.element_dofs(elem);
  for (int k = 0; k < 3; ++k) tv[k] = m.vertices[m.elements[elem][k]];
  Vec2 u = tv[1] - tv[0], w = tv[2] - tv[0], d = p - tv[0];
  double det = u.x() * w.y() - u.y() * w.x();
  double l1 = (d.x() * w.y() - d.y() * w.x()) / det;
  double l2 = (u.x() * d.y() - u.y() * d.x()) / det;
  return coeff[dofs[0]] * (1 - l1 - l2) + coeff[dofs[1]] * l1 + coeff[dofs[2]] * l2;
}

// brute-force 𝖦ₓ entry: edge Gauss quadrature on Γ^(ν) times the clipped
// half-space integral over Ω_v^(ν)
DenseMatrix brute_gx(const Mesh& xm, const Mesh& vm, const SeparableFunction& g,
                     const DenseMatrix& V) {
  DenseMatrix G = DenseMatrix::Zero(xm.n_dof, V.cols());
  for (const auto& piece : xm.boundary_pieces) {
    for (int mu = 0; mu < g.n_terms(); ++mu) {
      // x side: ∫_{Γν} φ_α g_x ds
      Vector bx = Vector::Zero(xm.n_dof);
      for (const auto& fr : piece.facets) {
        auto fv = xm.facet_vertices(fr.elem, fr.local);
        Vec2 a = xm.vertices[fv[0]], b = xm.vertices[fv[1]];
        int da = xm.dof_map[fv[0]], db = xm.dof_map[fv[1]];
        double len = (b - a).norm();
        for (int q = 0; q < 8; ++q) {
          double s = 0.5 * (gauss8_x[q] + 1.0);
          double wq = 0.5 * gauss8_w[q] * len;
          double gval = (1 - s) * g.gx[mu][da] + s * g.gx[mu][db];
          bx[da] += wq * (1 - s) * gval;
          bx[db] += wq * s * gval;
        }
      }
      // v side: ∫_{Ων} n·v g_v V_j dv
      Vector bv = Vector::Zero(V.cols());
      for (int j = 0; j < V.cols(); ++j) {
        Vector vj = V.col(j);
        double iv = 0.0;
        for (int e = 0; e < vm.n_elements(); ++e)
          iv += clipped_halfspace_integral(
              vm, e, piece.normal, [&](const Vec2& p) {
                return piece.normal.dot(p) * p1_eval(vm, e, g.gv[mu], p) *
                       p1_eval(vm, e, vj, p);
              });
        bv[j] = iv;
      }
      G.noalias() += bx * bv.transpose();
    }
  }
  return G;
}

}  // namespace

TEST_CASE("sample_separable exactly represents rank-1 factors") {
  Mesh xm = build_rect_tri_mesh(Vec2(0, 1), Vec2(0, 1), 4, 4, {false, false});
  Mesh vm = build_rect_tri_mesh(Vec2(-2, 2), Vec2(-2, 2), 6, 6, {true, true});
  std::vector<FactorFn> fs = {
      [](double, double x, double v) { return std::sin(x) * std::exp(-v * v); },
      [](double, double x, double v) { return (1.0 + x) * std::cos(v); }};
  SeparableFunction g = sample_separable(fs, 0.0, xm, vm, 10);
  CHECK(g.n_terms() == 1);
  for (int a = 0; a < xm.n_dof; ++a)
    for (int b = 0; b < vm.n_dof; ++b) {
      Vec2 x = xm.dof_point(a), v = vm.dof_point(b);
      double exact = fs[0](0, x.x(), v.x()) * fs[1](0, x.y(), v.y());
      double approx = g.gx[0][a] * g.gv[0][b];
      CHECK(approx == doctest::Approx(exact).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("sample_separable reconstructs fbar(0.25) to 1e-8") {
  Mesh xm = load_polygon_mesh(triangle_mesh_text(25));
  Mesh vm = build_rect_tri_mesh(Vec2(-4, 4), Vec2(-4, 4), 64, 64, {true, true});
  CharacteristicsSolution sol;
  std::vector<FactorFn> fs;
  for (int k = 0; k < 2; ++k)
    fs.push_back([sol, k](double t, double x, double v) {
      return sol.factor(k, t, x, v);
    });
  double t = 0.25;
  SeparableFunction g = sample_separable(fs, t, xm, vm, 25);
  CHECK(g.n_terms() <= 25 * 25);

  double max_err = 0.0, max_val = 0.0;
  for (int a = 0; a < xm.n_dof; ++a) {
    Vec2 x = xm.dof_point(a);
    for (int b = 0; b < vm.n_dof; ++b) {
      Vec2 v = vm.dof_point(b);
      double exact = fbar(t, x, v, sol);
      double approx = 0.0;
      for (int mu = 0; mu < g.n_terms(); ++mu)
        approx += g.gx[mu][a] * g.gv[mu][b];
      max_err = std::max(max_err, std::abs(approx - exact));
      max_val = std::max(max_val, std::abs(exact));
    }
  }
  REQUIRE(max_val > 0.1);  // the bump is inside the domain at t = 0.25
  CHECK(max_err / max_val <= 1e-8);
}

TEST_CASE("sample_separable of zero data has zero terms") {
  Mesh xm = build_interval_mesh(0.0, 1.0, 4, false);
  Mesh vm = build_interval_mesh(-1.0, 1.0, 4, true);
  std::vector<FactorFn> fs = {[](double, double, double) { return 0.0; }};
  CHECK(sample_separable(fs, 0.0, xm, vm, 5).n_terms() == 0);
  CHECK_THROWS_AS(sample_separable(fs, 0.0, xm, vm, 0), InvalidArgument);
}

TEST_CASE("zero-term assembly yields zero load matrices") {
  Mesh xm = build_interval_mesh(0.0, 1.0, 4, false);
  Mesh vm = build_interval_mesh(-1.0, 1.0, 8, true);
  OperatorSet ops = assemble_operator_set(xm, vm);
  SeparableFunction g;  // zero terms
  InflowAssembly a = assemble_inflow(g, ops);
  CHECK(a.empty());
  DenseMatrix V = random_matrix(vm.n_dof, 3);
  DenseMatrix X = random_matrix(xm.n_dof, 3);
  CHECK(gx_matrix(a, V).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gv_matrix(a, X).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gs_matrix(a, X, V).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("outflow-supported data is annihilated piecewise") {
  Mesh vm = build_interval_mesh(-4.0, 4.0, 64, true);
  // bump supported in v ∈ [1.5, 2.5] ⊂ {v > 0}
  Vector gv(vm.n_dof);
  for (int b = 0; b < vm.n_dof; ++b)
    gv[b] = phi_bump((vm.dof_point(b).x() - 2.0) / 0.5);
  // the piece with outward normal +1 has inflow region {v < 0}: load vanishes
  SparseMatrix Hplus = assemble_halfspace_mass(vm, Vec2(1, 0));
  CHECK((Hplus * gv).cwiseAbs().maxCoeff() <= 1e-10);
  // while the opposite piece sees the data
  SparseMatrix Hminus = assemble_halfspace_mass(vm, Vec2(-1, 0));
  CHECK((Hminus * gv).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("gx_matrix matches brute-force boundary quadrature on fbar data") {
  Mesh xm = load_polygon_mesh(triangle_mesh_text(6));
  Mesh vm = build_rect_tri_mesh(Vec2(-4, 4), Vec2(-4, 4), 12, 12, {true, true});
  OperatorSet ops = assemble_operator_set(xm, vm);

  CharacteristicsSolution sol;
  std::vector<FactorFn> fs;
  for (int k = 0; k < 2; ++k)
    fs.push_back([sol, k](double t, double x, double v) {
      return sol.factor(k, t, x, v);
    });
  SeparableFunction g = sample_separable(fs, 0.1, xm, vm, 8);
  REQUIRE(g.n_terms() >= 1);
  InflowAssembly a = assemble_inflow(g, ops);

  DenseMatrix V = random_matrix(vm.n_dof, 3);
  DenseMatrix G = gx_matrix(a, V);
  DenseMatrix Gref = brute_gx(xm, vm, g, V);
  double scale = std::max(Gref.cwiseAbs().maxCoeff(), 1e-12);
  CHECK((G - Gref).cwiseAbs().maxCoeff() / scale <= 1e-10);
  CHECK(Gref.cwiseAbs().maxCoeff() > 1e-8);  // data actually flows in
}

TEST_CASE("gv_matrix matches brute force through the consistency triangle") {
  // Xᵀ·gx_matrix = gs_matrix = (Vᵀ·gv_matrix)ᵀ for arbitrary bases
  Mesh xm = load_polygon_mesh(triangle_mesh_text(5));
  Mesh vm = build_rect_tri_mesh(Vec2(-4, 4), Vec2(-4, 4), 10, 10, {true, true});
  OperatorSet ops = assemble_operator_set(xm, vm);
  CharacteristicsSolution sol;
  std::vector<FactorFn> fs;
  for (int k = 0; k < 2; ++k)
    fs.push_back([sol, k](double t, double x, double v) {
      return sol.factor(k, t, x, v);
    });
  SeparableFunction g = sample_separable(fs, 0.1, xm, vm, 6);
  InflowAssembly a = assemble_inflow(g, ops);

  DenseMatrix X = random_matrix(xm.n_dof, 4);
  DenseMatrix V = random_matrix(vm.n_dof, 4);
  DenseMatrix S1 = X.transpose() * gx_matrix(a, V);
  DenseMatrix S2 = gs_matrix(a, X, V);
  DenseMatrix S3 = (V.transpose() * gv_matrix(a, X)).transpose();
  double scale = std::max(S2.cwiseAbs().maxCoeff(), 1e-12);
  CHECK((S1 - S2).cwiseAbs().maxCoeff() / scale <= 1e-12);
  CHECK((S3 - S2).cwiseAbs().maxCoeff() / scale <= 1e-12);
}

TEST_CASE("assembly is linear in the data terms") {
  Mesh xm = build_interval_mesh(0.0, 1.0, 6, false);
  Mesh vm = build_interval_mesh(-2.0, 2.0, 12, true);
  OperatorSet ops = assemble_operator_set(xm, vm);

  SeparableFunction g1, g2, g12;
  g1.gx.push_back(random_matrix(xm.n_dof, 1));
  g1.gv.push_back(random_matrix(vm.n_dof, 1));
  g2.gx.push_back(random_matrix(xm.n_dof, 1));
  g2.gv.push_back(random_matrix(vm.n_dof, 1));
  g12.gx = {g1.gx[0], g2.gx[0]};
  g12.gv = {g1.gv[0], g2.gv[0]};

  DenseMatrix V = random_matrix(vm.n_dof, 2);
  DenseMatrix sum = gx_matrix(assemble_inflow(g1, ops), V) +
                    gx_matrix(assemble_inflow(g2, ops), V);
  DenseMatrix both = gx_matrix(assemble_inflow(g12, ops), V);
  CHECK((sum - both).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("rank-1 loads on a two-dof pair by hand") {
  Mesh xm = build_interval_mesh(0.0, 1.0, 1, false);   // dofs {0,1}
  Mesh vm = build_interval_mesh(-1.0, 1.0, 2, true);   // dofs {0,1}, dof0 at ±1
  OperatorSet ops = assemble_operator_set(xm, vm);

  SeparableFunction g;
  Vector gx(2), gv(2);
  gx << 2.0, 0.5;
  gv << 1.0, 3.0;
  g.gx.push_back(gx);
  g.gv.push_back(gv);
  InflowAssembly a = assemble_inflow(g, ops);

  // piece 0 (normal -1 at x=0): half-space {v > 0} = element (0,1) with
  // dofs (1,0); hand-integrated -v-weighted local mass:
  //   H(1,1) = -1/12, H(1,0) = H(0,1) = -1/12, H(0,0) = -1/4
  Vector bv_expected(2);
  bv_expected[0] = -0.25 * gv[0] - (1.0 / 12.0) * gv[1];
  bv_expected[1] = -(1.0 / 12.0) * gv[0] - (1.0 / 12.0) * gv[1];
  CHECK((a.bv[0][0] - bv_expected).cwiseAbs().maxCoeff() <= 1e-14);
  // x load: point mass at the left dof
  CHECK(a.bx[0][0][0] == doctest::Approx(2.0));
  CHECK(a.bx[0][0][1] == 0.0);

  DenseMatrix X(2, 1), V(2, 1);
  X << 1.0, -1.0;
  V << 0.5, 1.0;
  DenseMatrix S = gs_matrix(a, X, V);
  // piece 1 contributes through its own half-space analogously; check the
  // full contraction against explicit sums
  double expected = 0.0;
  for (size_t nu = 0; nu < a.bx.size(); ++nu)
    expected += X.col(0).dot(a.bx[nu][0]) * V.col(0).dot(a.bv[nu][0]);
  CHECK(S(0, 0) == doctest::Approx(expected).epsilon(1e-14));
  double hand_piece0 = (X(0, 0) * 2.0) * (V.col(0).dot(bv_expected));
  double hand = hand_piece0;
  {
    // piece 1 (normal +1 at x=1): half-space {v < 0} = element (-1,0),
    // dofs (0,1), weight +v: H(0,0) = -1/4, coupling -1/12, H(1,1) = -1/12
    Vector bv1(2);
    bv1[0] = -0.25 * gv[0] - (1.0 / 12.0) * gv[1];
    bv1[1] = -(1.0 / 12.0) * gv[0] - (1.0 / 12.0) * gv[1];
    hand += (X(1, 0) * 0.5) * (V.col(0).dot(bv1));
  }
  CHECK(S(0, 0) == doctest::Approx(hand).epsilon(1e-13));
}

TEST_CASE("AnalyticInflow caches per stage time and honors freezing") {
  Mesh xm = load_polygon_mesh(triangle_mesh_text(4));
  Mesh vm = build_rect_tri_mesh(Vec2(-4, 4), Vec2(-4, 4), 8, 8, {true, true});
  OperatorSet ops = assemble_operator_set(xm, vm);
  CharacteristicsSolution sol;
  std::vector<FactorFn> fs;
  for (int k = 0; k < 2; ++k)
    fs.push_back([sol, k](double t, double x, double v) {
      return sol.factor(k, t, x, v);
    });

  AnalyticInflow live(fs, ops, 5, false);
  live.begin_step(0.0);
  const InflowAssembly* a0 = live.assembly_at(0.0);
  const InflowAssembly* a0again = live.assembly_at(0.0);
  CHECK(a0 == a0again);  // cached
  const InflowAssembly* a1 = live.assembly_at(0.05);
  CHECK(a0 != a1);

  AnalyticInflow frozen(fs, ops, 5, true);
  frozen.begin_step(0.1);
  const InflowAssembly* f1 = frozen.assembly_at(0.1);
  const InflowAssembly* f2 = frozen.assembly_at(0.15);
  CHECK(f1 == f2);  // both resolve to the step-start snapshot
}
