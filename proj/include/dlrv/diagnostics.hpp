#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dlrv/dlra.hpp"
#include "dlrv/field.hpp"
#include "dlrv/inflow.hpp"

namespace dlrv {

struct DiagnosticsRecord {
  double t = 0.0;
  double electric_energy = 0.0;
  double mass = 0.0;
  double total_energy = 0.0;
  double entropy = 0.0;
  int rank = 1;
  std::optional<double> l2_error;
  double wall_ms = 0.0;
};

/// Mass, kinetic + electric energy, entropy ‖S‖_F² and rank of a state.
DiagnosticsRecord diagnostics(const LowRankState& state, const OperatorSet& ops,
                              const ElectricField& E);

/// Discrete L₂ error against a separable reference, both interpolated onto
/// the once-refined tensor mesh pair and measured in its mass norms.
/// Caches the refined meshes, prolongations and mass matrices.
class L2ErrorComputer {
 public:
  L2ErrorComputer(const Mesh& x_mesh, const Mesh& v_mesh,
                  std::vector<FactorFn> reference, int max_terms);
  double error(const LowRankState& state) const;

 private:
  Mesh fx_, fv_;
  SparseMatrix Px_, Pv_;
  SparseMatrix Mxf_, Mvf_;
  std::vector<FactorFn> ref_;
  int max_terms_;
};

/// One-shot variant of L2ErrorComputer::error.
double l2_error(const LowRankState& state, const std::vector<FactorFn>& reference,
                const OperatorSet& ops, int max_terms = 25);

/// Least-squares slope of log(local maxima of electric_energy) over
/// records with t in [t_lo, t_hi]. Used to fit Landau decay rates.
double fit_log_maxima_slope(const std::vector<DiagnosticsRecord>& series,
                            double t_lo, double t_hi);

std::string format_double(double v);  // %.17g, round-trip exact

void write_matrix_text(const DenseMatrix& M, const std::string& path);
DenseMatrix read_matrix_text(const std::string& path);

/// FNV-1a over the mesh geometry and connectivity.
std::string mesh_hash(const Mesh& mesh);

struct Snapshot {
  LowRankState state;
  std::string x_mesh_hash, v_mesh_hash;
};

/// Writes diagnostics.csv, one directory per snapshot (X.mat/S.mat/V.mat and
/// meta.txt) and scenario.resolved.txt into out_dir.
void write_outputs(const std::vector<DiagnosticsRecord>& series,
                   const std::vector<Snapshot>& snapshots,
                   const std::vector<std::pair<std::string, std::string>>& resolved,
                   const std::string& out_dir);

}  // namespace dlrv
