#include "dlrv/dlra.hpp"

#include <cmath>
#include <random>

#include "dlrv/errors.hpp"

namespace dlrv {

namespace {

struct VProj {
  std::vector<DenseMatrix> Mv_k, Tv_k, Mv_half;
};

struct XProj {
  std::vector<DenseMatrix> Tx_k, Mx_E, Mx_bnd;
};

VProj project_v(const OperatorSet& ops, const DenseMatrix& V) {
  VProj p;
  for (int k = 0; k < ops.dim; ++k) {
    p.Mv_k.push_back(V.transpose() * (ops.Mv_k[k] * V));
    p.Tv_k.push_back(V.transpose() * (ops.Tv[k] * V));
  }
  for (int nu = 0; nu < ops.n_pieces(); ++nu)
    p.Mv_half.push_back(V.transpose() * (ops.Mv_half[nu] * V));
  return p;
}

XProj project_x(const OperatorSet& ops, const DenseMatrix& X) {
  XProj p;
  for (int k = 0; k < ops.dim; ++k) {
    p.Tx_k.push_back(X.transpose() * (ops.Tx[k] * X));
    p.Mx_E.push_back(X.transpose() * (ops.Mx_E[k] * X));
  }
  for (int nu = 0; nu < ops.n_pieces(); ++nu)
    p.Mx_bnd.push_back(X.transpose() * (ops.Mx_bnd[nu] * X));
  return p;
}

DenseMatrix k_rhs_impl(const DenseMatrix& K, const VProj& pv, const DenseMatrix& V,
                       const OperatorSet& ops, const InflowAssembly* inflow,
                       double delta) {
  DenseMatrix R = DenseMatrix::Zero(K.rows(), K.cols());
  for (int k = 0; k < ops.dim; ++k) {
    R.noalias() -= (ops.Tx[k] * K) * pv.Mv_k[k].transpose();
    R.noalias() += (ops.Mx_E[k] * K) * pv.Tv_k[k].transpose();
  }
  if (delta != 0.0) R.noalias() -= delta * (ops.Cx * K);
  for (int nu = 0; nu < ops.n_pieces(); ++nu)
    R.noalias() += (ops.Mx_bnd[nu] * K) * pv.Mv_half[nu].transpose();
  if (inflow && !inflow->empty()) R.noalias() -= gx_matrix(*inflow, V);
  return ops.Mx_chol.solve(R);
}

DenseMatrix s_rhs_impl(const DenseMatrix& S, const XProj& px, const VProj& pv,
                       const DenseMatrix& X, const DenseMatrix& V,
                       const OperatorSet& ops, const InflowAssembly* inflow,
                       bool forward) {
  DenseMatrix R = DenseMatrix::Zero(S.rows(), S.cols());
  for (int k = 0; k < ops.dim; ++k) {
    R.noalias() += px.Tx_k[k] * S * pv.Mv_k[k].transpose();
    R.noalias() -= px.Mx_E[k] * S * pv.Tv_k[k].transpose();
  }
  for (int nu = 0; nu < ops.n_pieces(); ++nu)
    R.noalias() -= px.Mx_bnd[nu] * S * pv.Mv_half[nu].transpose();
  if (inflow && !inflow->empty()) R.noalias() += gs_matrix(*inflow, X, V);
  return forward ? DenseMatrix(-R) : R;
}

DenseMatrix l_rhs_impl(const DenseMatrix& L, const XProj& px, const DenseMatrix& X,
                       const OperatorSet& ops, const InflowAssembly* inflow,
                       double delta) {
  DenseMatrix R = DenseMatrix::Zero(L.rows(), L.cols());
  for (int k = 0; k < ops.dim; ++k) {
    R.noalias() -= (ops.Mv_k[k] * L) * px.Tx_k[k].transpose();
    R.noalias() += (ops.Tv[k] * L) * px.Mx_E[k].transpose();
  }
  if (delta != 0.0) R.noalias() -= delta * (ops.Cv * L);
  for (int nu = 0; nu < ops.n_pieces(); ++nu)
    R.noalias() += (ops.Mv_half[nu] * L) * px.Mx_bnd[nu].transpose();
  if (inflow && !inflow->empty()) R.noalias() -= gv_matrix(*inflow, X);
  return ops.Mv_chol.solve(R);
}

// `substeps` RK3 cycles over [t0, t0+dt]
DenseMatrix integrate(const OdeRhs& rhs, DenseMatrix Y, double t0, double dt,
                      int substeps) {
  double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) Y = rk3_step(rhs, Y, t0 + i * h, h);
  return Y;
}

const InflowAssembly* assembly_or_null(InflowProvider* inflow, double t) {
  return inflow ? inflow->assembly_at(t) : nullptr;
}

}  // namespace

FixedField::FixedField(const Mesh& x_mesh, const Vec2& E)
    : field_(constant_field(x_mesh, E)) {}

const ElectricField& FixedField::refresh(const LowRankState&, OperatorSet& ops) {
  if (!applied_) {
    update_field_matrices(ops, field_);
    applied_ = true;
  }
  return field_;
}

SelfConsistentField::SelfConsistentField(const Mesh& x_mesh, double rho_b)
    : solver_(x_mesh), rho_b_(rho_b) {
  field_.per_element.assign(x_mesh.n_elements(), Vec2::Zero());
}

const ElectricField& SelfConsistentField::refresh(const LowRankState& state,
                                                  OperatorSet& ops) {
  Vector rho = compute_density(state.X, state.S, state.V, ops.Mv, rho_b_);
  Vector phi = solver_.solve(rho);
  field_ = compute_e_field(ops.x_mesh, phi);
  update_field_matrices(ops, field_);
  return field_;
}

DenseMatrix k_rhs(const DenseMatrix& K, const DenseMatrix& V, const OperatorSet& ops,
                  const InflowAssembly* inflow, double delta) {
  if (K.rows() != ops.n_x || V.rows() != ops.n_v || K.cols() != V.cols())
    throw InvalidArgument("k_rhs: dimension mismatch");
  return k_rhs_impl(K, project_v(ops, V), V, ops, inflow, delta);
}

DenseMatrix s_rhs(const DenseMatrix& S, const DenseMatrix& X, const DenseMatrix& V,
                  const OperatorSet& ops, const InflowAssembly* inflow, bool forward) {
  if (X.rows() != ops.n_x || V.rows() != ops.n_v || S.rows() != X.cols() ||
      S.cols() != V.cols())
    throw InvalidArgument("s_rhs: dimension mismatch");
  return s_rhs_impl(S, project_x(ops, X), project_v(ops, V), X, V, ops, inflow,
                    forward);
}

DenseMatrix l_rhs(const DenseMatrix& L, const DenseMatrix& X, const OperatorSet& ops,
                  const InflowAssembly* inflow, double delta) {
  if (L.rows() != ops.n_v || X.rows() != ops.n_x || L.cols() != X.cols())
    throw InvalidArgument("l_rhs: dimension mismatch");
  return l_rhs_impl(L, project_x(ops, X), X, ops, inflow, delta);
}

LowRankState psi_step(const LowRankState& state, OperatorSet& ops,
                      FieldUpdater* field, InflowProvider* inflow,
                      const StepConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidArgument("psi_step: dt must be positive");
  if (field) field->refresh(state, ops);
  if (inflow) inflow->begin_step(state.t);

  // K step: evolve K = X·S against the frozen V basis
  VProj pv = project_v(ops, state.V);
  auto k_ode = [&](double t, const DenseMatrix& K) {
    return k_rhs_impl(K, pv, state.V, ops, assembly_or_null(inflow, t), cfg.delta);
  };
  DenseMatrix K1 =
      integrate(k_ode, state.X * state.S, state.t, cfg.dt, cfg.substeps);
  MOrthResult kq;
  if (K1.cwiseAbs().maxCoeff() == 0.0) {
    // exactly zero factors keep their basis (zero state stays zero)
    kq.Q = state.X;
    kq.R = DenseMatrix::Zero(state.rank(), state.rank());
  } else {
    try {
      kq = m_orthonormalize(K1, ops.Mx_chol);
    } catch (const RankDeficient& e) {
      throw RankDeficient(std::string("psi_step K-step: ") + e.what());
    }
  }

  // S step, signs as printed for the splitting (the negative projector)
  XProj px = project_x(ops, kq.Q);
  auto s_ode = [&](double t, const DenseMatrix& S) {
    return s_rhs_impl(S, px, pv, kq.Q, state.V, ops, assembly_or_null(inflow, t),
                      /*forward=*/false);
  };
  DenseMatrix Stilde = integrate(s_ode, kq.R, state.t, cfg.dt, cfg.substeps);

  // L step: evolve L = V·S̃ᵀ against the updated X basis
  auto l_ode = [&](double t, const DenseMatrix& L) {
    return l_rhs_impl(L, px, kq.Q, ops, assembly_or_null(inflow, t), cfg.delta);
  };
  DenseMatrix L1 =
      integrate(l_ode, state.V * Stilde.transpose(), state.t, cfg.dt, cfg.substeps);
  MOrthResult lq;
  if (L1.cwiseAbs().maxCoeff() == 0.0) {
    lq.Q = state.V;
    lq.R = DenseMatrix::Zero(state.rank(), state.rank());
  } else {
    try {
      lq = m_orthonormalize(L1, ops.Mv_chol);
    } catch (const RankDeficient& e) {
      throw RankDeficient(std::string("psi_step L-step: ") + e.what());
    }
  }

  return {kq.Q, lq.R.transpose(), lq.Q, state.t + cfg.dt};
}

LowRankState rauc_step(const LowRankState& state, OperatorSet& ops,
                       FieldUpdater* field, InflowProvider* inflow,
                       const StepConfig& cfg, StepReport* report) {
  if (!(cfg.dt > 0.0)) throw InvalidArgument("rauc_step: dt must be positive");
  const int r0 = state.rank();
  if (2 * r0 > std::min(ops.n_x, ops.n_v))
    throw InvalidArgument("rauc_step: augmented rank exceeds mesh resolution");
  if (field) field->refresh(state, ops);
  if (inflow) inflow->begin_step(state.t);

  // independent K and L updates from the t0 data
  VProj pv0 = project_v(ops, state.V);
  XProj px0 = project_x(ops, state.X);
  auto k_ode = [&](double t, const DenseMatrix& K) {
    return k_rhs_impl(K, pv0, state.V, ops, assembly_or_null(inflow, t), cfg.delta);
  };
  auto l_ode = [&](double t, const DenseMatrix& L) {
    return l_rhs_impl(L, px0, state.X, ops, assembly_or_null(inflow, t), cfg.delta);
  };
  DenseMatrix K1 =
      integrate(k_ode, state.X * state.S, state.t, cfg.dt, cfg.substeps);
  DenseMatrix L1 = integrate(l_ode, state.V * state.S.transpose(), state.t, cfg.dt,
                             cfg.substeps);

  // augmented bases [X0, K1], [V0, L1]; dependent columns are dropped
  DenseMatrix XA(ops.n_x, 2 * r0);
  XA << state.X, K1;
  DenseMatrix VA(ops.n_v, 2 * r0);
  VA << state.V, L1;
  MOrthRrResult ax = m_orthonormalize_rr(XA, ops.Mx_chol);
  MOrthRrResult av = m_orthonormalize_rr(VA, ops.Mv_chol);
  if (ax.rank < 1 || av.rank < 1)
    throw RankDeficient("rauc_step: augmented basis collapsed");
  DenseMatrix Rx = ax.R.leftCols(r0);
  DenseMatrix Rv = av.R.leftCols(r0);
  DenseMatrix Shat = Rx * state.S * Rv.transpose();

  // forward S step in the augmented bases
  VProj pva = project_v(ops, av.Q);
  XProj pxa = project_x(ops, ax.Q);
  auto s_ode = [&](double t, const DenseMatrix& S) {
    return s_rhs_impl(S, pxa, pva, ax.Q, av.Q, ops, assembly_or_null(inflow, t),
                      /*forward=*/true);
  };
  DenseMatrix Stilde = integrate(s_ode, Shat, state.t, cfg.dt, cfg.substeps);

  SvdTruncation tr = svd_truncate(Stilde, cfg.eps, cfg.r_max);
  if (report) {
    report->dropped_x = 2 * r0 - ax.rank;
    report->dropped_v = 2 * r0 - av.rank;
    report->rank = tr.r1;
  }
  LowRankState out;
  out.X = ax.Q * tr.Qx;
  out.V = av.Q * tr.Qv;
  out.S = DenseMatrix(tr.sigma.asDiagonal());
  out.t = state.t + cfg.dt;
  return out;
}

LowRankState compress_initial(const SeparableFunction& f0, int r,
                              const OperatorSet& ops) {
  if (r < 1) throw InvalidArgument("compress_initial: rank must be >= 1");

  auto zero_state = [&]() {
    LowRankState s;
    MOrthResult qx = m_orthonormalize(Vector::Ones(ops.n_x), ops.Mx_chol);
    MOrthResult qv = m_orthonormalize(Vector::Ones(ops.n_v), ops.Mv_chol);
    s.X = qx.Q;
    s.V = qv.Q;
    s.S = DenseMatrix::Zero(1, 1);
    s.t = f0.t;
    return s;
  };
  if (f0.n_terms() == 0) return zero_state();

  const int m = f0.n_terms();
  DenseMatrix Gx(ops.n_x, m), Gv(ops.n_v, m);
  for (int mu = 0; mu < m; ++mu) {
    Gx.col(mu) = f0.gx[mu];
    Gv.col(mu) = f0.gv[mu];
  }
  MOrthRrResult qx = m_orthonormalize_rr(Gx, ops.Mx_chol);
  MOrthRrResult qv = m_orthonormalize_rr(Gv, ops.Mv_chol);
  if (qx.rank == 0 || qv.rank == 0) return zero_state();

  DenseMatrix core = qx.R * qv.R.transpose();
  SvdTruncation tr = svd_truncate(core, 0.0, r);
  // drop numerically vanished directions so the reported rank is the
  // available one
  int keep = tr.r1;
  while (keep > 1 && tr.sigma[keep - 1] <= tr.sigma[0] * 1e-14) --keep;

  LowRankState s;
  s.X = qx.Q * tr.Qx.leftCols(keep);
  s.V = qv.Q * tr.Qv.leftCols(keep);
  s.S = DenseMatrix(tr.sigma.head(keep).asDiagonal());
  s.t = f0.t;
  return s;
}

LowRankState pad_to_rank(const LowRankState& state, int r, const OperatorSet& ops,
                         unsigned seed) {
  if (r < 1) throw InvalidArgument("pad_to_rank: rank must be >= 1");
  const int r0 = state.rank();
  if (r0 == r) return state;
  if (r0 > r) {
    SvdTruncation tr = svd_truncate(state.S, 0.0, r);
    LowRankState out;
    out.X = state.X * tr.Qx;
    out.V = state.V * tr.Qv;
    out.S = DenseMatrix(tr.sigma.asDiagonal());
    out.t = state.t;
    return out;
  }

  std::mt19937 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto extend = [&](const DenseMatrix& B, const SparseMatrix& M) {
    DenseMatrix E(B.rows(), r);
    E.leftCols(r0) = B;
    for (int j = r0; j < r; ++j) {
      Vector c(B.rows());
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = dist(gen);
      // two Gram-Schmidt passes in the M inner product
      for (int pass = 0; pass < 2; ++pass)
        c -= E.leftCols(j) * (E.leftCols(j).transpose() * (M * c));
      double nrm = std::sqrt(c.dot(M * c));
      if (!(nrm > 0.0)) throw RankDeficient("pad_to_rank: degenerate padding");
      E.col(j) = c / nrm;
    }
    return E;
  };
  LowRankState out;
  out.X = extend(state.X, ops.Mx);
  out.V = extend(state.V, ops.Mv);
  out.S = DenseMatrix::Zero(r, r);
  out.S.topLeftCorner(r0, r0) = state.S;
  out.t = state.t;
  return out;
}

double orthonormality_defect(const LowRankState& state, const OperatorSet& ops) {
  const int r = state.rank();
  DenseMatrix gx = state.X.transpose() * (ops.Mx * state.X) -
                   DenseMatrix::Identity(r, r);
  DenseMatrix gv = state.V.transpose() * (ops.Mv * state.V) -
                   DenseMatrix::Identity(r, r);
  return std::max(gx.cwiseAbs().maxCoeff(), gv.cwiseAbs().maxCoeff());
}

LowRankState reorthonormalize(const LowRankState& state, const OperatorSet& ops) {
  MOrthResult qx = m_orthonormalize(state.X, ops.Mx_chol);
  MOrthResult qv = m_orthonormalize(state.V, ops.Mv_chol);
  LowRankState out;
  out.X = qx.Q;
  out.V = qv.Q;
  out.S = qx.R * state.S * qv.R.transpose();
  out.t = state.t;
  return out;
}

}  // namespace dlrv
