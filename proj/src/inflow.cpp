#include "dlrv/inflow.hpp"

#include <algorithm>
#include <cmath>

#include "dlrv/errors.hpp"

namespace dlrv {

namespace {

struct FactorSvd {
  std::vector<Vector> u;  // on x-dofs
  std::vector<Vector> w;  // on v-dofs (expanded from distinct values)
  std::vector<double> sigma;
};

// SVD of one 2D factor sampled on (x-dof coords in direction k) ×
// (distinct v-dof coords in direction k). Sampling on distinct v values
// keeps the matrix narrow; the expansion back to v-dofs is a row lookup.
FactorSvd factor_svd(const FactorFn& f, double t, int k, const Mesh& x_mesh,
                     const Mesh& v_mesh, int max_terms) {
  const int n_x = x_mesh.n_dof;
  const int n_v = v_mesh.n_dof;

  std::vector<double> vals(n_v);
  for (int b = 0; b < n_v; ++b) vals[b] = v_mesh.dof_point(b)[k];
  std::vector<double> distinct = vals;
  std::sort(distinct.begin(), distinct.end());
  const double tol = v_mesh.match_tol()[k];
  std::vector<double> uniq;
  for (double v : distinct)
    if (uniq.empty() || v - uniq.back() > tol) uniq.push_back(v);
  std::vector<int> which(n_v);
  for (int b = 0; b < n_v; ++b) {
    auto it = std::lower_bound(uniq.begin(), uniq.end(), vals[b] - tol);
    which[b] = static_cast<int>(it - uniq.begin());
  }

  DenseMatrix A(n_x, static_cast<int>(uniq.size()));
  for (int a = 0; a < n_x; ++a) {
    double xk = x_mesh.dof_point(a)[k];
    for (size_t q = 0; q < uniq.size(); ++q) A(a, static_cast<int>(q)) = f(t, xk, uniq[q]);
  }

  Eigen::BDCSVD<DenseMatrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  double cutoff = sv.size() > 0 ? sv[0] * 1e-14 : 0.0;
  int m = 0;
  while (m < sv.size() && m < max_terms && sv[m] > cutoff) ++m;

  FactorSvd out;
  for (int i = 0; i < m; ++i) {
    out.sigma.push_back(sv[i]);
    out.u.emplace_back(svd.matrixU().col(i));
    Vector w(n_v);
    for (int b = 0; b < n_v; ++b) w[b] = svd.matrixV()(which[b], i);
    out.w.push_back(std::move(w));
  }
  return out;
}

}  // namespace

SeparableFunction sample_separable(const std::vector<FactorFn>& factors, double t,
                                   const Mesh& x_mesh, const Mesh& v_mesh,
                                   int max_terms) {
  if (max_terms < 1) throw InvalidArgument("sample_separable: max_terms must be >= 1");
  if (static_cast<int>(factors.size()) != x_mesh.dim)
    throw InvalidArgument("sample_separable: one factor per dimension required");

  SeparableFunction g;
  g.t = t;
  if (x_mesh.dim == 1) {
    FactorSvd s = factor_svd(factors[0], t, 0, x_mesh, v_mesh, max_terms);
    for (size_t i = 0; i < s.sigma.size(); ++i) {
      g.gx.push_back(s.sigma[i] * s.u[i]);
      g.gv.push_back(s.w[i]);
    }
    return g;
  }

  FactorSvd s1 = factor_svd(factors[0], t, 0, x_mesh, v_mesh, max_terms);
  FactorSvd s2 = factor_svd(factors[1], t, 1, x_mesh, v_mesh, max_terms);
  // Kronecker combination of the truncated factor expansions, ordered by
  // σ1·σ2 and keeping every pair above a relative floor (the factor spectra
  // decay fast, so this stays far below max_terms² in practice)
  struct Pair {
    double weight;
    int i, j;
  };
  std::vector<Pair> pairs;
  for (size_t i = 0; i < s1.sigma.size(); ++i)
    for (size_t j = 0; j < s2.sigma.size(); ++j)
      pairs.push_back({s1.sigma[i] * s2.sigma[j], static_cast<int>(i),
                       static_cast<int>(j)});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  while (!pairs.empty() && pairs.back().weight <= 1e-12 * pairs.front().weight)
    pairs.pop_back();
  for (const Pair& p : pairs) {
    g.gx.push_back(p.weight * s1.u[p.i].cwiseProduct(s2.u[p.j]));
    g.gv.push_back(s1.w[p.i].cwiseProduct(s2.w[p.j]));
  }
  return g;
}

InflowAssembly assemble_inflow(const SeparableFunction& g, const OperatorSet& ops) {
  InflowAssembly a;
  a.n_terms = g.n_terms();
  a.n_x = ops.n_x;
  a.n_v = ops.n_v;
  const int np = ops.n_pieces();
  a.bx.resize(np);
  a.bv.resize(np);
  for (int nu = 0; nu < np; ++nu) {
    a.bx[nu].reserve(a.n_terms);
    a.bv[nu].reserve(a.n_terms);
    for (int mu = 0; mu < a.n_terms; ++mu) {
      a.bx[nu].push_back(ops.Mx_bnd[nu] * g.gx[mu]);
      a.bv[nu].push_back(ops.Mv_half[nu] * g.gv[mu]);
    }
  }
  return a;
}

DenseMatrix gx_matrix(const InflowAssembly& a, const DenseMatrix& V) {
  DenseMatrix G = DenseMatrix::Zero(a.n_x, V.cols());
  if (a.empty()) return G;
  for (size_t nu = 0; nu < a.bx.size(); ++nu)
    for (int mu = 0; mu < a.n_terms; ++mu) {
      if (a.bv[nu][mu].size() != V.rows())
        throw InvalidArgument("gx_matrix: dimension mismatch");
      G.noalias() += a.bx[nu][mu] * (a.bv[nu][mu].transpose() * V);
    }
  return G;
}

DenseMatrix gv_matrix(const InflowAssembly& a, const DenseMatrix& X) {
  DenseMatrix G = DenseMatrix::Zero(a.n_v, X.cols());
  if (a.empty()) return G;
  for (size_t nu = 0; nu < a.bx.size(); ++nu)
    for (int mu = 0; mu < a.n_terms; ++mu) {
      if (a.bx[nu][mu].size() != X.rows())
        throw InvalidArgument("gv_matrix: dimension mismatch");
      G.noalias() += a.bv[nu][mu] * (a.bx[nu][mu].transpose() * X);
    }
  return G;
}

DenseMatrix gs_matrix(const InflowAssembly& a, const DenseMatrix& X,
                      const DenseMatrix& V) {
  DenseMatrix G = DenseMatrix::Zero(X.cols(), V.cols());
  if (a.empty()) return G;
  for (size_t nu = 0; nu < a.bx.size(); ++nu)
    for (int mu = 0; mu < a.n_terms; ++mu) {
      if (a.bx[nu][mu].size() != X.rows() || a.bv[nu][mu].size() != V.rows())
        throw InvalidArgument("gs_matrix: dimension mismatch");
      G.noalias() += (X.transpose() * a.bx[nu][mu]) *
                     (V.transpose() * a.bv[nu][mu]).transpose();
    }
  return G;
}

AnalyticInflow::AnalyticInflow(std::vector<FactorFn> factors, const OperatorSet& ops,
                               int max_terms, bool freeze_at_step_start)
    : factors_(std::move(factors)),
      ops_(ops),
      max_terms_(max_terms),
      freeze_(freeze_at_step_start) {}

void AnalyticInflow::begin_step(double t0) {
  t0_ = t0;
  cache_.clear();
}

const InflowAssembly* AnalyticInflow::assembly_at(double t) {
  double key = freeze_ ? t0_ : t;
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    SeparableFunction g =
        sample_separable(factors_, key, ops_.x_mesh, ops_.v_mesh, max_terms_);
    it = cache_.emplace(key, assemble_inflow(g, ops_)).first;
  }
  return &it->second;
}

}  // namespace dlrv
