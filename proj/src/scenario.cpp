#include "dlrv/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "dlrv/errors.hpp"
#include "dlrv/oracle.hpp"

namespace dlrv {

namespace {

std::vector<std::string> tokens_of(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': invalid number '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int i = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': invalid integer '" + v + "'");
  }
}

bool parse_periodic_flag(const std::string& key, const std::string& v) {
  if (v == "periodic") return true;
  if (v == "open") return false;
  throw ConfigError("key '" + key + "': expected 'periodic' or 'open', got '" + v +
                    "'");
}

Mesh build_x_mesh(const Scenario& s) {
  auto tok = tokens_of(s.x_mesh);
  if (tok.empty()) throw ConfigError("key 'x_mesh': empty specification");
  const std::string& kind = tok[0];
  if (kind == "interval") {
    if (tok.size() != 5)
      throw ConfigError("key 'x_mesh': interval expects: interval a b n flag");
    return build_interval_mesh(to_double("x_mesh", tok[1]),
                               to_double("x_mesh", tok[2]),
                               to_int("x_mesh", tok[3]),
                               parse_periodic_flag("x_mesh", tok[4]));
  }
  if (kind == "box") {
    if (tok.size() != 9)
      throw ConfigError(
          "key 'x_mesh': box expects: box x0 x1 y0 y1 nx ny flagx flagy");
    return build_rect_tri_mesh(
        Vec2(to_double("x_mesh", tok[1]), to_double("x_mesh", tok[2])),
        Vec2(to_double("x_mesh", tok[3]), to_double("x_mesh", tok[4])),
        to_int("x_mesh", tok[5]), to_int("x_mesh", tok[6]),
        {parse_periodic_flag("x_mesh", tok[7]),
         parse_periodic_flag("x_mesh", tok[8])});
  }
  if (kind == "triangle") {
    if (tok.size() != 2)
      throw ConfigError("key 'x_mesh': triangle expects: triangle n");
    return load_polygon_mesh(triangle_mesh_text(to_int("x_mesh", tok[1])));
  }
  if (kind == "file") {
    if (tok.size() != 2) throw ConfigError("key 'x_mesh': file expects: file path");
    std::ifstream in(tok[1]);
    if (!in) throw ConfigError("key 'x_mesh': cannot open mesh file " + tok[1]);
    std::stringstream buf;
    buf << in.rdbuf();
    return load_polygon_mesh(buf.str());
  }
  throw ConfigError("key 'x_mesh': unknown generator '" + kind + "'");
}

Mesh build_v_mesh(const Scenario& s, int dim) {
  if (!(s.v_box_lo < s.v_box_hi))
    throw ConfigError("key 'v_mesh.box': degenerate box");
  if (s.v_n < 2) throw ConfigError("key 'v_mesh.n': must be >= 2");
  if (dim == 1) return build_interval_mesh(s.v_box_lo, s.v_box_hi, s.v_n, true);
  return build_rect_tri_mesh(Vec2(s.v_box_lo, s.v_box_hi),
                             Vec2(s.v_box_lo, s.v_box_hi), s.v_n, s.v_n,
                             {true, true});
}

SeparableFunction landau_initial(const Mesh& xm, const Mesh& vm, double alpha,
                                 double k) {
  SeparableFunction f0;
  const int dim = xm.dim;
  Vector maxwell(vm.n_dof);
  for (int b = 0; b < vm.n_dof; ++b) {
    Vec2 v = vm.dof_point(b);
    maxwell[b] = dim == 1 ? std::exp(-0.5 * v.x() * v.x()) / std::sqrt(2.0 * M_PI)
                          : std::exp(-0.5 * v.squaredNorm()) / (2.0 * M_PI);
  }
  f0.gx.push_back(Vector::Ones(xm.n_dof));
  f0.gv.push_back(maxwell);
  for (int d = 0; d < dim; ++d) {
    Vector c(xm.n_dof);
    for (int a = 0; a < xm.n_dof; ++a)
      c[a] = alpha * std::cos(k * xm.dof_point(a)[d]);
    f0.gx.push_back(c);
    f0.gv.push_back(maxwell);
  }
  return f0;
}

std::vector<FactorFn> fbar_factors() {
  CharacteristicsSolution sol;
  std::vector<FactorFn> f;
  for (int k = 0; k < 2; ++k)
    f.push_back([sol, k](double t, double xk, double vk) {
      return sol.factor(k, t, xk, vk);
    });
  return f;
}

struct Resolved {
  double dt;
  double eps;
  int output_every;
};

Resolved level_scaled(const Scenario& s) {
  // Δt and ε scale by exactly 4^{-ℓ}; cadence by 4^{ℓ} to keep record times
  // aligned across levels
  Resolved r;
  r.dt = std::ldexp(s.dt, -2 * s.level);
  r.eps = std::ldexp(s.eps, -2 * s.level);
  r.output_every = s.output_every << (2 * s.level);
  return r;
}

void validate(const Scenario& s) {
  auto expect = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  expect(s.t_end > 0.0, "key 't_end': must be positive");
  expect(s.dt > 0.0, "key 'dt': must be positive");
  expect(s.rank >= 1, "key 'rank': must be >= 1");
  expect(s.r_max >= 1, "key 'r_max': must be >= 1");
  expect(s.level >= 0, "key 'level': must be >= 0");
  expect(s.substeps >= 1, "key 'substeps': must be >= 1");
  expect(s.output_every >= 1, "key 'output.every': must be >= 1");
  expect(s.eps >= 0.0, "key 'eps': must be >= 0");
  expect(s.delta >= 0.0, "key 'delta': must be >= 0");
  expect(s.inflow_max_terms >= 1, "key 'inflow.max_terms': must be >= 1");
  expect(s.field_mode == "poisson" || s.field_mode == "constant",
         "key 'field.mode': expected 'poisson' or 'constant'");
  expect(s.init_kind == "landau" || s.init_kind == "zero",
         "key 'init.kind': expected 'landau' or 'zero'");
  expect(s.inflow_kind == "none" || s.inflow_kind == "fbar",
         "key 'inflow.kind': expected 'none' or 'fbar'");
  expect(s.inflow_refresh == "stage" || s.inflow_refresh == "step",
         "key 'inflow.refresh': expected 'stage' or 'step'");
  expect(s.integrator == "psi" || s.integrator == "rauc",
         "key 'integrator': expected 'psi' or 'rauc'");
}

}  // namespace

std::array<Vec2, 3> inflow_triangle_vertices() {
  return {Vec2(0.9, -0.5), Vec2(1.9, 0.0), Vec2(0.9, 0.5)};
}

std::string triangle_mesh_text(int n) {
  if (n < 1) throw InvalidArgument("triangle_mesh_text: n must be >= 1");
  auto corners = inflow_triangle_vertices();
  const Vec2 A = corners[0], B = corners[1], C = corners[2];

  // lattice v(i,j) = A + i/n (B-A) + j/n (C-A), i + j <= n
  std::vector<int> offset(n + 2, 0);
  std::vector<Vec2> verts;
  for (int j = 0; j <= n; ++j) {
    offset[j] = static_cast<int>(verts.size());
    for (int i = 0; i + j <= n; ++i)
      verts.push_back(A + (static_cast<double>(i) / n) * (B - A) +
                      (static_cast<double>(j) / n) * (C - A));
  }
  auto vid = [&](int i, int j) { return offset[j] + i; };

  struct Tri {
    int a, b, c;
  };
  std::vector<Tri> tris;
  std::vector<int> up_elem(static_cast<size_t>(n) * (n + 1), -1);
  auto up_key = [n](int i, int j) { return i + j * n; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i + j < n; ++i) {
      up_elem[up_key(i, j)] = static_cast<int>(tris.size());
      tris.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
      if (i + j < n - 1)
        tris.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }

  std::ostringstream out;
  out << "# lattice triangulation of the inflow triangle, n = " << n << "\n";
  out << "2 " << verts.size() << " " << tris.size() << " " << 3 * n << "\n";
  for (const Vec2& v : verts)
    out << format_double(v.x()) << " " << format_double(v.y()) << "\n";
  for (const Tri& t : tris) out << t.a << " " << t.b << " " << t.c << "\n";
  // piece 0: lower slant A-B (local edge 0 of the j = 0 up-triangles)
  for (int i = 0; i < n; ++i) out << up_elem[up_key(i, 0)] << " 0 0\n";
  // piece 1: upper slant B-C (local edge 1 of the i + j = n - 1 up-triangles)
  for (int j = 0; j < n; ++j) out << up_elem[up_key(n - 1 - j, j)] << " 1 1\n";
  // piece 2: inflow base C-A at x1 = const (local edge 2 of the i = 0 column)
  for (int j = 0; j < n; ++j) out << up_elem[up_key(0, j)] << " 2 2\n";
  return out.str();
}

Scenario preset(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "landau_1d1v") {
    s.x_mesh = "interval 0 12.566370614359172 64 periodic";
    s.v_box_lo = -6.0;
    s.v_box_hi = 6.0;
    s.v_n = 256;
    s.field_mode = "poisson";
    s.rho_b = 1.0;
    s.init_kind = "landau";
    s.init_alpha = 1e-2;
    s.init_k = 0.5;
    s.inflow_kind = "none";
    s.integrator = "psi";
    s.rank = 5;
    s.dt = 0.005;
    s.t_end = 25.0;
    s.delta = 0.0;
    s.output_every = 1;
    s.out_dir = "out/landau_1d1v";
  } else if (name == "landau_2d2v_small") {
    s.x_mesh = "box 0 12.566370614359172 0 12.566370614359172 32 32 periodic periodic";
    s.v_box_lo = -6.0;
    s.v_box_hi = 6.0;
    s.v_n = 64;
    s.field_mode = "poisson";
    s.rho_b = 1.0;
    s.init_kind = "landau";
    s.init_alpha = 1e-2;
    s.init_k = 0.5;
    s.inflow_kind = "none";
    s.integrator = "psi";
    s.rank = 10;
    s.dt = 0.005;
    s.t_end = 20.0;
    s.delta = 0.0;
    s.output_every = 2;
    s.out_dir = "out/landau_2d2v_small";
  } else if (name == "inflow_triangle") {
    s.x_mesh = "triangle 25";
    s.v_box_lo = -4.0;
    s.v_box_hi = 4.0;
    s.v_n = 64;
    s.field_mode = "constant";
    s.field_E = Vec2(0.0, 4.0);
    s.rho_b = 0.0;
    s.init_kind = "zero";
    s.inflow_kind = "fbar";
    s.inflow_max_terms = 25;
    s.inflow_refresh = "stage";
    s.integrator = "rauc";
    s.rank = 1;
    s.dt = 0.005;
    s.t_end = 0.5;
    s.eps = 1e-3;
    s.delta = 1e-2;
    s.r_max = 40;
    s.output_every = 1;
    s.snapshot_times = {0.075, 0.25, 0.375};
    s.out_dir = "out/inflow_triangle";
  } else {
    throw ConfigError("key 'scenario': unknown preset '" + name + "'");
  }
  return s;
}

Scenario parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (!tokens_of(line).empty())
        throw ConfigError("config line without '=': " + line);
      continue;
    }
    auto trim = [](std::string v) {
      size_t b = v.find_first_not_of(" \t\r");
      size_t e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line with empty key: " + line);
    entries.emplace_back(key, val);
  }

  Scenario s;
  for (const auto& [k, v] : entries)
    if (k == "scenario") s = preset(v);
  for (const auto& [key, val] : entries) {
    if (key == "scenario") {
    } else if (key == "x_mesh") {
      s.x_mesh = val;
    } else if (key == "v_mesh.box") {
      auto t = tokens_of(val);
      if (t.size() != 2) throw ConfigError("key 'v_mesh.box': expected 'lo hi'");
      s.v_box_lo = to_double(key, t[0]);
      s.v_box_hi = to_double(key, t[1]);
    } else if (key == "v_mesh.n") {
      s.v_n = to_int(key, val);
    } else if (key == "field.mode") {
      s.field_mode = val;
    } else if (key == "field.E") {
      auto t = tokens_of(val);
      if (t.empty() || t.size() > 2)
        throw ConfigError("key 'field.E': expected 1 or 2 components");
      s.field_E = Vec2(to_double(key, t[0]),
                       t.size() == 2 ? to_double(key, t[1]) : 0.0);
    } else if (key == "rho_b") {
      s.rho_b = to_double(key, val);
    } else if (key == "init.kind") {
      s.init_kind = val;
    } else if (key == "init.alpha") {
      s.init_alpha = to_double(key, val);
    } else if (key == "init.k") {
      s.init_k = to_double(key, val);
    } else if (key == "inflow.kind") {
      s.inflow_kind = val;
    } else if (key == "inflow.max_terms") {
      s.inflow_max_terms = to_int(key, val);
    } else if (key == "inflow.refresh") {
      s.inflow_refresh = val;
    } else if (key == "dt") {
      s.dt = to_double(key, val);
    } else if (key == "t_end") {
      s.t_end = to_double(key, val);
    } else if (key == "rank") {
      s.rank = to_int(key, val);
    } else if (key == "integrator") {
      s.integrator = val;
    } else if (key == "eps") {
      s.eps = to_double(key, val);
    } else if (key == "delta") {
      s.delta = to_double(key, val);
    } else if (key == "r_max") {
      s.r_max = to_int(key, val);
    } else if (key == "substeps") {
      s.substeps = to_int(key, val);
    } else if (key == "level") {
      s.level = to_int(key, val);
    } else if (key == "output.every") {
      s.output_every = to_int(key, val);
    } else if (key == "snapshot.times") {
      s.snapshot_times.clear();
      for (const std::string& t : tokens_of(val))
        s.snapshot_times.push_back(to_double(key, t));
    } else if (key == "out_dir") {
      s.out_dir = val;
    } else if (key == "seed") {
      s.seed = static_cast<unsigned>(to_int(key, val));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  validate(s);
  return s;
}

std::vector<std::pair<std::string, std::string>> resolved_parameters(
    const Scenario& s) {
  Resolved r = level_scaled(s);
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("scenario", s.name);
  out.emplace_back("x_mesh", s.x_mesh);
  out.emplace_back("v_mesh.box",
                   format_double(s.v_box_lo) + " " + format_double(s.v_box_hi));
  out.emplace_back("v_mesh.n", std::to_string(s.v_n));
  out.emplace_back("field.mode", s.field_mode);
  out.emplace_back("field.E", format_double(s.field_E.x()) + " " +
                                  format_double(s.field_E.y()));
  out.emplace_back("rho_b", format_double(s.rho_b));
  out.emplace_back("init.kind", s.init_kind);
  out.emplace_back("init.alpha", format_double(s.init_alpha));
  out.emplace_back("init.k", format_double(s.init_k));
  out.emplace_back("inflow.kind", s.inflow_kind);
  out.emplace_back("inflow.max_terms", std::to_string(s.inflow_max_terms));
  out.emplace_back("inflow.refresh", s.inflow_refresh);
  out.emplace_back("level", std::to_string(s.level));
  out.emplace_back("dt", format_double(r.dt));
  out.emplace_back("t_end", format_double(s.t_end));
  out.emplace_back("rank", std::to_string(s.rank));
  out.emplace_back("integrator", s.integrator);
  out.emplace_back("eps", format_double(r.eps));
  out.emplace_back("delta", format_double(s.delta));
  out.emplace_back("r_max", std::to_string(s.r_max));
  out.emplace_back("substeps", std::to_string(s.substeps));
  out.emplace_back("output.every", std::to_string(r.output_every));
  std::string snaps;
  for (double t : s.snapshot_times) {
    if (!snaps.empty()) snaps += " ";
    snaps += format_double(t);
  }
  out.emplace_back("snapshot.times", snaps);
  out.emplace_back("out_dir", s.out_dir);
  out.emplace_back("seed", std::to_string(s.seed));
  return out;
}

RunResult run_scenario(const Scenario& s) {
  validate(s);
  Resolved eff = level_scaled(s);

  Mesh xm = build_x_mesh(s);
  Mesh vm = build_v_mesh(s, xm.dim);
  for (int l = 0; l < s.level; ++l) {
    xm = refine_uniform(xm);
    vm = refine_uniform(vm);
  }
  OperatorSet ops = assemble_operator_set(xm, vm);

  std::unique_ptr<FieldUpdater> field;
  if (s.field_mode == "constant") {
    field = std::make_unique<FixedField>(xm, s.field_E);
  } else {
    if (!xm.fully_periodic())
      throw ConfigError(
          "key 'field.mode': poisson requires a fully periodic x mesh");
    field = std::make_unique<SelfConsistentField>(xm, s.rho_b);
  }

  std::unique_ptr<AnalyticInflow> inflow;
  std::unique_ptr<L2ErrorComputer> err;
  if (s.inflow_kind == "fbar") {
    if (xm.dim != 2)
      throw ConfigError("key 'inflow.kind': fbar requires a 2D spatial mesh");
    inflow = std::make_unique<AnalyticInflow>(fbar_factors(), ops,
                                              s.inflow_max_terms,
                                              s.inflow_refresh == "step");
    err = std::make_unique<L2ErrorComputer>(xm, vm, fbar_factors(),
                                            s.inflow_max_terms);
  }

  SeparableFunction f0;
  if (s.init_kind == "landau") f0 = landau_initial(xm, vm, s.init_alpha, s.init_k);
  LowRankState state = compress_initial(f0, s.rank, ops);
  if (s.integrator == "psi") state = pad_to_rank(state, s.rank, ops, s.seed);

  StepConfig cfg;
  cfg.dt = eff.dt;
  cfg.delta = s.delta;
  cfg.eps = eff.eps;
  cfg.r_max = s.r_max;
  cfg.substeps = s.substeps;
  cfg.integrator = s.integrator == "psi" ? IntegratorKind::psi : IntegratorKind::rauc;

  const long n_steps = std::lround(s.t_end / eff.dt);
  std::vector<double> pending_snaps = s.snapshot_times;
  std::sort(pending_snaps.begin(), pending_snaps.end());

  RunResult result;
  result.resolved = resolved_parameters(s);
  const std::string xh = mesh_hash(xm), vh = mesh_hash(vm);
  const auto t_start = std::chrono::steady_clock::now();

  // a dedicated solver instance keeps diagnostics from touching ops
  std::unique_ptr<PoissonSolver> diag_solver;
  if (s.field_mode == "poisson") diag_solver = std::make_unique<PoissonSolver>(xm);
  auto field_for_diag = [&](const LowRankState& st) -> ElectricField {
    if (s.field_mode == "constant") return constant_field(xm, s.field_E);
    Vector rho = compute_density(st.X, st.S, st.V, ops.Mv, s.rho_b);
    return compute_e_field(xm, diag_solver->solve(rho));
  };

  auto record = [&](const LowRankState& st) {
    DiagnosticsRecord rec = diagnostics(st, ops, field_for_diag(st));
    if (err) rec.l2_error = err->error(st);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
    result.series.push_back(rec);
  };
  auto maybe_snapshot = [&](const LowRankState& st) {
    while (!pending_snaps.empty() &&
           st.t >= pending_snaps.front() - 0.5 * eff.dt) {
      result.snapshots.push_back({st, xh, vh});
      pending_snaps.erase(pending_snaps.begin());
    }
  };

  record(state);
  maybe_snapshot(state);
  for (long i = 1; i <= n_steps; ++i) {
    try {
      if (cfg.integrator == IntegratorKind::psi)
        state = psi_step(state, ops, field.get(), inflow.get(), cfg);
      else
        state = rauc_step(state, ops, field.get(), inflow.get(), cfg);
    } catch (const Error& e) {
      throw NumericalBlowup(std::string("step failed (") + e.what() +
                                "), last good time",
                            state.t);
    }
    if (orthonormality_defect(state, ops) > 1e-9)
      state = reorthonormalize(state, ops);
    if (i % eff.output_every == 0 || i == n_steps) record(state);
    maybe_snapshot(state);
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace dlrv
