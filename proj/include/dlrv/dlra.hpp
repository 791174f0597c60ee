#pragma once

#include <optional>

#include "dlrv/fem.hpp"
#include "dlrv/field.hpp"
#include "dlrv/inflow.hpp"
#include "dlrv/linalg.hpp"

namespace dlrv {

/// Low-rank factorization fʰ = X·S·Vᵀ with mass-orthonormal bases
/// (XᵀMₓX = I, VᵀMᵥV = I).
struct LowRankState {
  DenseMatrix X;  // n_x × r
  DenseMatrix S;  // r × r
  DenseMatrix V;  // n_v × r
  double t = 0.0;
  int rank() const { return static_cast<int>(S.rows()); }
};

enum class IntegratorKind { psi, rauc };

struct StepConfig {
  double dt = 0.0;
  double delta = 0.0;       // CIP multiplier
  double eps = 0.0;         // RAUC truncation tolerance
  int r_max = 40;
  int substeps = 1;         // RK3 cycles per sub-step interval
  IntegratorKind integrator = IntegratorKind::psi;
};

struct StepReport {
  int dropped_x = 0;  // dependent columns dropped in the X augmentation
  int dropped_v = 0;
  int rank = 0;
};

/// Per-step electric field refresh (§ field freezing: computed at t₀ and
/// held constant across the K/S/L sub-steps).
class FieldUpdater {
 public:
  virtual ~FieldUpdater() = default;
  virtual const ElectricField& refresh(const LowRankState& state,
                                       OperatorSet& ops) = 0;
  virtual const ElectricField& current() const = 0;
};

/// Prescribed constant field; the weighted mass matrices are set once.
class FixedField : public FieldUpdater {
 public:
  FixedField(const Mesh& x_mesh, const Vec2& E);
  const ElectricField& refresh(const LowRankState&, OperatorSet& ops) override;
  const ElectricField& current() const override { return field_; }

 private:
  ElectricField field_;
  bool applied_ = false;
};

/// Self-consistent field via the Poisson equation each step.
class SelfConsistentField : public FieldUpdater {
 public:
  SelfConsistentField(const Mesh& x_mesh, double rho_b);
  const ElectricField& refresh(const LowRankState& state, OperatorSet& ops) override;
  const ElectricField& current() const override { return field_; }

 private:
  PoissonSolver solver_;
  double rho_b_;
  ElectricField field_;
};

/// Right-hand sides of the discrete K/S/L equations; basis projections are
/// computed internally. inflow may be null (no boundary data).
DenseMatrix k_rhs(const DenseMatrix& K, const DenseMatrix& V, const OperatorSet& ops,
                  const InflowAssembly* inflow, double delta);
/// forward = false gives the projector-splitting variant (signs as flipped
/// by the negative projector); forward = true its negation, used by the
/// rank-adaptive integrator.
DenseMatrix s_rhs(const DenseMatrix& S, const DenseMatrix& X, const DenseMatrix& V,
                  const OperatorSet& ops, const InflowAssembly* inflow, bool forward);
DenseMatrix l_rhs(const DenseMatrix& L, const DenseMatrix& X, const OperatorSet& ops,
                  const InflowAssembly* inflow, double delta);

/// One projector-splitting step (K → S → L) of size cfg.dt; the rank is
/// preserved. field/inflow may be null.
LowRankState psi_step(const LowRankState& state, OperatorSet& ops,
                      FieldUpdater* field, InflowProvider* inflow,
                      const StepConfig& cfg);

/// One rank-adaptive unconventional step: independent K/L updates, basis
/// augmentation, forward S equation, SVD truncation with tolerance cfg.eps
/// capped at cfg.r_max.
LowRankState rauc_step(const LowRankState& state, OperatorSet& ops,
                       FieldUpdater* field, InflowProvider* inflow,
                       const StepConfig& cfg, StepReport* report = nullptr);

/// Best rank-≤r approximation of a separable function in the discrete
/// M-weighted L₂ norm. A zero function yields the rank-1 zero state.
LowRankState compress_initial(const SeparableFunction& f0, int r,
                              const OperatorSet& ops);

/// Pads the state with deterministic seeded M-orthonormal columns (zero rows
/// and columns in S) up to rank r, or truncates to r when larger.
LowRankState pad_to_rank(const LowRankState& state, int r, const OperatorSet& ops,
                         unsigned seed);

/// max(‖XᵀMₓX − I‖_max, ‖VᵀMᵥV − I‖_max)
double orthonormality_defect(const LowRankState& state, const OperatorSet& ops);

LowRankState reorthonormalize(const LowRankState& state, const OperatorSet& ops);

}  // namespace dlrv
