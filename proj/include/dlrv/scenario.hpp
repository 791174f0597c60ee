#pragma once

#include <string>
#include <vector>

#include "dlrv/diagnostics.hpp"
#include "dlrv/dlra.hpp"

namespace dlrv {

/// Fully resolved run configuration. Presets fill one; config files override
/// individual keys. Level ℓ refines both meshes ℓ times and scales dt and
/// eps by 4^{-ℓ} (and the output cadence by 4^ℓ so records of all levels
/// align on one time grid).
struct Scenario {
  std::string name = "custom";
  std::string x_mesh = "interval 0 12.566370614359172 64 periodic";
  double v_box_lo = -6.0, v_box_hi = 6.0;
  int v_n = 256;
  std::string field_mode = "poisson";  // "poisson" | "constant"
  Vec2 field_E = Vec2::Zero();
  double rho_b = 1.0;
  std::string init_kind = "landau";  // "landau" | "zero"
  double init_alpha = 1e-2;
  double init_k = 0.5;
  std::string inflow_kind = "none";  // "none" | "fbar"
  int inflow_max_terms = 25;
  std::string inflow_refresh = "stage";  // "stage" | "step"
  double dt = 0.005;
  double t_end = 25.0;
  int rank = 5;
  std::string integrator = "psi";  // "psi" | "rauc"
  double eps = 1e-3;
  double delta = 0.0;
  int r_max = 40;
  int substeps = 1;
  int level = 0;
  int output_every = 1;
  std::vector<double> snapshot_times;
  std::string out_dir = "out";
  unsigned seed = 0;
};

/// Named presets: landau_1d1v, landau_2d2v_small, inflow_triangle.
Scenario preset(const std::string& name);

/// Parses the flat key-value config format ('#' comments). A `scenario` key
/// selects the preset; remaining keys override it. Unknown keys and
/// malformed values raise ConfigError naming the key.
Scenario parse_config(const std::string& text);

/// Effective key/value listing after level scaling, as echoed to
/// scenario.resolved.txt.
std::vector<std::pair<std::string, std::string>> resolved_parameters(const Scenario& s);

struct RunResult {
  LowRankState final_state;
  std::vector<DiagnosticsRecord> series;
  std::vector<Snapshot> snapshots;
  std::vector<std::pair<std::string, std::string>> resolved;
};

/// Builds meshes and operators, compresses the initial state, and advances
/// it to t_end, recording diagnostics every output cadence and snapshots at
/// the requested times. Deterministic for a fixed scenario (except wall_ms).
RunResult run_scenario(const Scenario& s);

/// Mesh-format text for the lattice triangulation (n subdivisions per edge)
/// of the inflow experiment's triangular domain, boundary pieces 0/1/2 on
/// the lower slant, upper slant, and inflow base.
std::string triangle_mesh_text(int n);

/// The triangular spatial domain of the inflow experiment.
std::array<Vec2, 3> inflow_triangle_vertices();

}  // namespace dlrv
