#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "dlrv/errors.hpp"
#include "dlrv/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dlrv::ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void print_resolved(const dlrv::Scenario& s) {
  for (const auto& [k, v] : dlrv::resolved_parameters(s))
    std::cout << k << " = " << v << "\n";
}

double max_l2(const std::vector<dlrv::DiagnosticsRecord>& series) {
  double m = 0.0;
  for (const auto& r : series)
    if (r.l2_error) m = std::max(m, *r.l2_error);
  return m;
}

int cmd_run(const std::string& config_path) {
  dlrv::Scenario s = dlrv::parse_config(slurp(config_path));
  dlrv::RunResult res = dlrv::run_scenario(s);
  dlrv::write_outputs(res.series, res.snapshots, res.resolved, s.out_dir);
  const auto& last = res.series.back();
  std::cout << "finished " << s.name << " at t = "
            << dlrv::format_double(last.t) << " (rank " << last.rank
            << "), outputs in " << s.out_dir << "\n";
  return 0;
}

int cmd_validate(const std::string& config_path) {
  dlrv::Scenario s = dlrv::parse_config(slurp(config_path));
  print_resolved(s);
  return 0;
}

int cmd_mesh_info(const std::string& mesh_path) {
  std::ifstream in(mesh_path);
  if (!in) throw dlrv::ConfigError("cannot open mesh file " + mesh_path);
  std::stringstream buf;
  buf << in.rdbuf();
  dlrv::Mesh m = dlrv::load_polygon_mesh(buf.str());
  std::cout << "dim        " << m.dim << "\n"
            << "vertices   " << m.n_vertices() << "\n"
            << "elements   " << m.n_elements() << "\n"
            << "dofs       " << m.n_dof << "\n"
            << "measure    " << dlrv::format_double(m.total_measure()) << "\n"
            << "pieces     " << m.boundary_pieces.size() << "\n";
  for (const auto& p : m.boundary_pieces)
    std::cout << "  piece " << p.id << ": " << p.facets.size()
              << " facets, normal (" << dlrv::format_double(p.normal.x()) << ", "
              << dlrv::format_double(p.normal.y()) << ")\n";
  std::cout << "hash       " << dlrv::mesh_hash(m) << "\n";
  return 0;
}

int cmd_convergence(const std::string& config_path, int levels) {
  dlrv::Scenario base = dlrv::parse_config(slurp(config_path));
  std::cout << "level  max_l2_error\n";
  double prev = 0.0;
  for (int l = 0; l <= levels; ++l) {
    dlrv::Scenario s = base;
    s.level = l;
    s.out_dir = base.out_dir + "/level" + std::to_string(l);
    dlrv::RunResult res = dlrv::run_scenario(s);
    dlrv::write_outputs(res.series, res.snapshots, res.resolved, s.out_dir);
    double m = max_l2(res.series);
    std::cout << l << "      " << dlrv::format_double(m)
              << (l > 0 && m < prev ? "  (decreased)" : "") << "\n";
    prev = m;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamical low-rank Vlasov-Poisson solver with inflow boundaries"};
  app.require_subcommand(1);

  std::string config_path, mesh_path;
  int levels = 1;

  auto* run = app.add_subcommand("run", "run a scenario config and write outputs");
  run->add_option("config", config_path, "config file")->required();

  auto* validate =
      app.add_subcommand("validate", "parse a config and echo resolved parameters");
  validate->add_option("config", config_path, "config file")->required();

  auto* mesh_info = app.add_subcommand("mesh-info", "inspect a mesh file");
  mesh_info->add_option("meshfile", mesh_path, "mesh file")->required();

  auto* conv =
      app.add_subcommand("convergence", "run levels 0..L and print max errors");
  conv->add_option("config", config_path, "config file")->required();
  conv->add_option("--levels", levels, "highest level to run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (validate->parsed()) return cmd_validate(config_path);
    if (mesh_info->parsed()) return cmd_mesh_info(mesh_path);
    if (conv->parsed()) return cmd_convergence(config_path, levels);
  } catch (const dlrv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dlrv::MeshError& e) {
    std::cerr << "mesh error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dlrv::NumericalBlowup& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const dlrv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
