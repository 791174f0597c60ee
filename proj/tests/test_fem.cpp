#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dlrv/errors.hpp"
#include "dlrv/fem.hpp"
#include "dlrv/mesh.hpp"

using namespace dlrv;

namespace {

const char* kRefTriangleText =
    "2 3 1 3\n"
    "0 0\n1 0\n0 1\n"
    "0 1 2\n"
    "0 0 0\n0 1 1\n0 2 2\n";

// Independent oracle: integrates w(p)·λ_i(p)·λ_j(p) over a triangle via the
// Duffy transform and tensor Gauss-Legendre (8x8, exact far beyond cubic).
double duffy_weighted_mass_entry(const Vec2& a, const Vec2& b, const Vec2& c,
                                 int i, int j,
                                 const std::function<double(const Vec2&)>& w) {
  static const double gx[8] = {-0.9602898564975363, -0.7966664774136267,
                               -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
  static const double gw[8] = {0.1012285362903763, 0.2223810344533745,
                               0.3137066458778873, 0.3626837833783620,
                               0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
  double area2 = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  double sum = 0.0;
  for (int p = 0; p < 8; ++p) {
    double u = 0.5 * (gx[p] + 1.0);
    for (int q = 0; q < 8; ++q) {
      double v = 0.5 * (gx[q] + 1.0) * (1.0 - u);
      double jac = 0.25 * (1.0 - u);  // du dv scaling and Duffy factor
      double l1 = u, l2 = v, l0 = 1.0 - u - v;
      double lam[3] = {l0, l1, l2};
      Vec2 pt = a + u * (b - a) + v * (c - a);
      sum += gw[p] * gw[q] * jac * w(pt) * lam[i] * lam[j];
    }
  }
  return sum * area2;
}

std::mt19937 rng(777);

Vector random_vector(int n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace

TEST_CASE("P1 mass on the unit interval") {
  Mesh m = build_interval_mesh(0.0, 1.0, 1, false);
  DenseMatrix M = DenseMatrix(assemble_mass(m));
  CHECK(M(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(M(0, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(M(1, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(M(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("periodic interval mass rows") {
  Mesh m = build_interval_mesh(0.0, 1.0, 2, true);
  DenseMatrix M = DenseMatrix(assemble_mass(m));
  REQUIRE(M.rows() == 2);
  CHECK(M.row(0).sum() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(M.row(1).sum() == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("weighted mass on the reference triangle matches Duffy oracle") {
  Mesh m = load_polygon_mesh(kRefTriangleText);
  auto w = [](const Vec2& p) { return p.x(); };  // weight v1
  DenseMatrix M = DenseMatrix(assemble_mass(m, w, 3));
  Vec2 a(0, 0), b(1, 0), c(0, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(M(i, j) ==
            doctest::Approx(duffy_weighted_mass_entry(a, b, c, i, j, w))
                .epsilon(1e-12));
}

TEST_CASE("quadratic weight needs degree 4 and matches the oracle") {
  Mesh m = load_polygon_mesh(kRefTriangleText);
  auto w = [](const Vec2& p) { return p.squaredNorm(); };
  DenseMatrix M = DenseMatrix(assemble_mass(m, w, 4));
  Vec2 a(0, 0), b(1, 0), c(0, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(M(i, j) ==
            doctest::Approx(duffy_weighted_mass_entry(a, b, c, i, j, w))
                .epsilon(1e-12));
}

TEST_CASE("transport matrix on the unit interval") {
  Mesh m = build_interval_mesh(0.0, 1.0, 1, false);
  DenseMatrix T = DenseMatrix(assemble_transport(m, 0));
  CHECK(T(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(T(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(T(1, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(T(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(assemble_transport(m, 1), InvalidArgument);
}

TEST_CASE("periodic transport is antisymmetric") {
  Mesh m1 = build_interval_mesh(-2.0, 2.0, 8, true);
  DenseMatrix T1 = DenseMatrix(assemble_transport(m1, 0));
  CHECK((T1 + T1.transpose()).cwiseAbs().maxCoeff() <= 1e-13);

  Mesh m2 = build_rect_tri_mesh(Vec2(0, 1), Vec2(0, 1), 4, 4, {true, true});
  for (int k = 0; k < 2; ++k) {
    DenseMatrix T = DenseMatrix(assemble_transport(m2, k));
    CHECK((T + T.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("transport on the reference triangle matches analytic integrals") {
  Mesh m = load_polygon_mesh(kRefTriangleText);
  // ∫ λ_i ∂_x λ_j = (∂_x λ_j)/6 on the unit triangle (area 1/2)
  DenseMatrix T = DenseMatrix(assemble_transport(m, 0));
  double gx[3] = {-1.0, 1.0, 0.0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(T(i, j) == doctest::Approx(gx[j] / 6.0).epsilon(1e-14));
}

TEST_CASE("integration by parts on a non-periodic interval") {
  Mesh m = build_interval_mesh(0.0, 1.5, 6, false);
  DenseMatrix T = DenseMatrix(assemble_transport(m, 0));
  DenseMatrix B = T + T.transpose();
  DenseMatrix expected = DenseMatrix::Zero(m.n_dof, m.n_dof);
  for (const auto& p : m.boundary_pieces) {
    DenseMatrix Mb = DenseMatrix(assemble_boundary_mass(m, p));
    expected += p.normal.x() * Mb;
  }
  CHECK((B - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("boundary mass") {
  SUBCASE("1D pieces are point evaluations") {
    Mesh m = build_interval_mesh(0.0, 1.0, 4, false);
    DenseMatrix Ml = DenseMatrix(assemble_boundary_mass(m, m.boundary_pieces[0]));
    CHECK(Ml(0, 0) == 1.0);
    CHECK(Ml.sum() == 1.0);
  }
  SUBCASE("edge of length 2") {
    const char* text =
        "2 3 1 3\n"
        "0 0\n2 0\n0 2\n"
        "0 1 2\n"
        "0 0 0\n0 1 1\n0 2 2\n";
    Mesh m = load_polygon_mesh(text);
    DenseMatrix Mb = DenseMatrix(assemble_boundary_mass(m, m.boundary_pieces[0]));
    CHECK(Mb(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(Mb(0, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(Mb(1, 1) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("partition of unity on a multi-facet piece") {
    Mesh m = build_rect_tri_mesh(Vec2(0, 3), Vec2(0, 1), 6, 2, {false, false});
    for (const auto& p : m.boundary_pieces) {
      DenseMatrix Mb = DenseMatrix(assemble_boundary_mass(m, p));
      double len = 0.0;
      for (const auto& f : p.facets) len += m.facet_measure(f.elem, f.local);
      CHECK(Mb.sum() == doctest::Approx(len).epsilon(1e-12));
    }
  }
}

TEST_CASE("half-space mass analytic integrals") {
  SUBCASE("1D") {
    Mesh m = build_interval_mesh(-2.0, 2.0, 4, true);
    SparseMatrix H = assemble_halfspace_mass(m, Vec2(1, 0));
    Vector ones = Vector::Ones(m.n_dof);
    CHECK(ones.dot(H * ones) == doctest::Approx(-2.0).epsilon(1e-13));
  }
  SUBCASE("2D axis normal") {
    Mesh m = build_rect_tri_mesh(Vec2(-4, 4), Vec2(-4, 4), 8, 8, {true, true});
    SparseMatrix H = assemble_halfspace_mass(m, Vec2(1, 0));
    Vector ones = Vector::Ones(m.n_dof);
    CHECK(ones.dot(H * ones) == doctest::Approx(-64.0).epsilon(1e-12));
  }
  SUBCASE("oblique normal, element fully inside") {
    const char* text =
        "2 3 1 3\n"
        "-3 -3\n-2 -3\n-3 -2\n"
        "0 1 2\n"
        "0 0 0\n0 1 1\n0 2 2\n";
    Mesh m = load_polygon_mesh(text);
    Vec2 n = Vec2(1, 1).normalized();
    SparseMatrix H = assemble_halfspace_mass(m, n);
    SparseMatrix W = assemble_mass(m, [n](const Vec2& v) { return n.dot(v); }, 3);
    CHECK((DenseMatrix(H) - DenseMatrix(W)).cwiseAbs().maxCoeff() <= 1e-13);
  }
  SUBCASE("zero normal rejected") {
    Mesh m = build_interval_mesh(-1.0, 1.0, 2, true);
    CHECK_THROWS_AS(assemble_halfspace_mass(m, Vec2(0, 0)), InvalidArgument);
  }
}

TEST_CASE("half-space tiling identity and negative semidefiniteness") {
  Mesh m = build_rect_tri_mesh(Vec2(-3, 3), Vec2(-3, 3), 6, 6, {true, true});
  for (Vec2 n : {Vec2(1, 0), Vec2(0, -1), Vec2(1, 1).normalized(),
                 Vec2(0.6, -0.8)}) {
    DenseMatrix Hp = DenseMatrix(assemble_halfspace_mass(m, n));
    DenseMatrix Hm = DenseMatrix(assemble_halfspace_mass(m, Vec2(-n)));
    DenseMatrix W =
        DenseMatrix(assemble_mass(m, [n](const Vec2& v) { return n.dot(v); }, 3));
    CHECK(((Hp - Hm) - W).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((Hp - Hp.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
    for (int trial = 0; trial < 20; ++trial) {
      Vector u = random_vector(m.n_dof);
      CHECK(u.dot(Hp * u) <= 1e-12);
    }
  }
}

TEST_CASE("CIP stabilization") {
  SUBCASE("affine functions are in the kernel") {
    Mesh m = build_rect_tri_mesh(Vec2(0, 2), Vec2(0, 1), 5, 4, {false, false});
    SparseMatrix C = assemble_cip(m);
    Vector u(m.n_dof);
    for (int d = 0; d < m.n_dof; ++d) {
      Vec2 p = m.dof_point(d);
      u[d] = 3.0 * p.x() - 2.0 * p.y() + 0.7;
    }
    CHECK((C * u).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("1D hat penalty by direct facet computation") {
    double h = 0.35;
    Mesh m = build_interval_mesh(0.0, 2 * h, 2, false);
    SparseMatrix C = assemble_cip(m);
    Vector u = Vector::Zero(3);
    u[1] = 1.0;  // hat at the shared dof
    // one interior facet, gradient jump (1/h) − (−1/h), weight h_F²·|F| = h²
    double expected = h * h * (2.0 / h) * (2.0 / h);
    CHECK(u.dot(C * u) == doctest::Approx(expected).epsilon(1e-13));
  }
  SUBCASE("positive semidefinite on random vectors") {
    Mesh m = build_rect_tri_mesh(Vec2(-1, 1), Vec2(-1, 1), 4, 4, {true, true});
    SparseMatrix C = assemble_cip(m);
    for (int trial = 0; trial < 100; ++trial) {
      Vector u = random_vector(m.n_dof);
      CHECK(u.dot(C * u) >= -1e-12);
    }
    Vector ones = Vector::Ones(m.n_dof);
    CHECK((C * ones).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("partition of unity for weighted masses") {
  Mesh m = build_rect_tri_mesh(Vec2(-2, 2), Vec2(-2, 2), 5, 5, {true, true});
  Vector ones = Vector::Ones(m.n_dof);
  SparseMatrix M = assemble_mass(m);
  CHECK(ones.dot(M * ones) == doctest::Approx(16.0).epsilon(1e-11));
  SparseMatrix Mv0 = assemble_mass(m, [](const Vec2& v) { return v.x(); }, 3);
  CHECK(ones.dot(Mv0 * ones) == doctest::Approx(0.0).epsilon(1e-11));
  // |v|² over the box: 2 ∫∫ v1² = 2 · (16/3 · 4) ... per direction 42.666…
  SparseMatrix Mvv =
      assemble_mass(m, [](const Vec2& v) { return v.squaredNorm(); }, 4);
  double exact = 2.0 * (std::pow(4.0, 3) / 12.0) * 4.0;
  CHECK(ones.dot(Mvv * ones) == doctest::Approx(exact).epsilon(1e-11));
}

TEST_CASE("assembly is invariant under element order permutation") {
  Mesh m = build_rect_tri_mesh(Vec2(0, 1), Vec2(0, 1), 3, 3, {true, true});
  Mesh rev = m;
  std::reverse(rev.elements.begin(), rev.elements.end());
  CHECK((DenseMatrix(assemble_mass(m)) - DenseMatrix(assemble_mass(rev)))
            .cwiseAbs()
            .maxCoeff() <= 1e-13);
  CHECK((DenseMatrix(assemble_transport(m, 0)) -
         DenseMatrix(assemble_transport(rev, 0)))
            .cwiseAbs()
            .maxCoeff() <= 1e-13);
  CHECK((DenseMatrix(assemble_cip(m)) - DenseMatrix(assemble_cip(rev)))
            .cwiseAbs()
            .maxCoeff() <= 1e-13);
}

TEST_CASE("assemble_operator_set shapes and boundary counts") {
  SUBCASE("periodic 1+1D has no boundary operators") {
    Mesh xm = build_interval_mesh(0.0, 1.0, 8, true);
    Mesh vm = build_interval_mesh(-2.0, 2.0, 8, true);
    OperatorSet ops = assemble_operator_set(xm, vm);
    CHECK(ops.Mx_bnd.empty());
    CHECK(ops.Mv_half.empty());
    CHECK(ops.Mx.rows() == xm.n_dof);
    CHECK(ops.Mv.rows() == vm.n_dof);
    CHECK(ops.Tx.size() == 1);
    CHECK(ops.Mx_E.size() == 1);
    CHECK(ops.Mx_E[0].nonZeros() == 0);
  }
  SUBCASE("bounded x domain gets one pair per piece") {
    const char* text =
        "2 3 1 3\n"
        "0 0\n1 0\n0 1\n"
        "0 1 2\n"
        "0 0 0\n0 1 1\n0 2 2\n";
    Mesh xm = load_polygon_mesh(text);
    Mesh vm = build_rect_tri_mesh(Vec2(-4, 4), Vec2(-4, 4), 6, 6, {true, true});
    OperatorSet ops = assemble_operator_set(xm, vm);
    CHECK(ops.Mx_bnd.size() == 3);
    CHECK(ops.Mv_half.size() == 3);
    for (const auto& A : ops.Mx_bnd) {
      CHECK(A.rows() == xm.n_dof);
      CHECK(A.cols() == xm.n_dof);
    }
    for (const auto& A : ops.Mv_half) {
      CHECK(A.rows() == vm.n_dof);
      CHECK(A.cols() == vm.n_dof);
    }
    CHECK(ops.Mv_vsq.rows() == vm.n_dof);
    CHECK(ops.Cx.rows() == xm.n_dof);
    CHECK(ops.Cv.rows() == vm.n_dof);
  }
  SUBCASE("non-periodic velocity mesh is rejected") {
    Mesh xm = build_interval_mesh(0.0, 1.0, 8, true);
    Mesh vm = build_interval_mesh(-2.0, 2.0, 8, false);
    CHECK_THROWS_AS(assemble_operator_set(xm, vm), InvalidArgument);
  }
}
