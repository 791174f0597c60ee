#include "dlrv/diagnostics.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dlrv/errors.hpp"

namespace dlrv {

DiagnosticsRecord diagnostics(const LowRankState& state, const OperatorSet& ops,
                              const ElectricField& E) {
  DiagnosticsRecord rec;
  rec.t = state.t;
  rec.rank = state.rank();

  Vector wx = ops.Mx * Vector::Ones(ops.n_x);
  Vector wv = ops.Mv * Vector::Ones(ops.n_v);
  Vector wvv = ops.Mv_vsq * Vector::Ones(ops.n_v);
  Vector a = state.X.transpose() * wx;
  Vector b = state.V.transpose() * wv;
  Vector c = state.V.transpose() * wvv;

  rec.mass = a.dot(state.S * b);
  double kinetic = 0.5 * a.dot(state.S * c);
  rec.electric_energy = electric_energy(E, ops.x_mesh);
  rec.total_energy = kinetic + rec.electric_energy;
  rec.entropy = state.S.squaredNorm();
  return rec;
}

L2ErrorComputer::L2ErrorComputer(const Mesh& x_mesh, const Mesh& v_mesh,
                                 std::vector<FactorFn> reference, int max_terms)
    : ref_(std::move(reference)), max_terms_(max_terms) {
  fx_ = refine_uniform(x_mesh, &Px_);
  fv_ = refine_uniform(v_mesh, &Pv_);
  Mxf_ = assemble_mass(fx_);
  Mvf_ = assemble_mass(fv_);
}

double L2ErrorComputer::error(const LowRankState& state) const {
  SeparableFunction g = sample_separable(ref_, state.t, fx_, fv_, max_terms_);
  const int r = state.rank();
  const int m = g.n_terms();
  DenseMatrix W(fx_.n_dof, r + m), Z(fv_.n_dof, r + m);
  W.leftCols(r) = Px_ * (state.X * state.S);
  Z.leftCols(r) = Pv_ * state.V;
  for (int mu = 0; mu < m; ++mu) {
    W.col(r + mu) = -g.gx[mu];
    Z.col(r + mu) = g.gv[mu];
  }
  DenseMatrix Gw = W.transpose() * (Mxf_ * W);
  DenseMatrix Gz = Z.transpose() * (Mvf_ * Z);
  double err2 = (Gw.array() * Gz.array()).sum();
  return std::sqrt(std::max(err2, 0.0));
}

double l2_error(const LowRankState& state, const std::vector<FactorFn>& reference,
                const OperatorSet& ops, int max_terms) {
  return L2ErrorComputer(ops.x_mesh, ops.v_mesh, reference, max_terms).error(state);
}

double fit_log_maxima_slope(const std::vector<DiagnosticsRecord>& series,
                            double t_lo, double t_hi) {
  std::vector<double> ts, ys;
  for (size_t i = 1; i + 1 < series.size(); ++i) {
    const double e = series[i].electric_energy;
    if (series[i].t < t_lo || series[i].t > t_hi) continue;
    if (e > series[i - 1].electric_energy && e > series[i + 1].electric_energy &&
        e > 0.0) {
      ts.push_back(series[i].t);
      ys.push_back(std::log(e));
    }
  }
  if (ts.size() < 2)
    throw InvalidArgument("fit_log_maxima_slope: fewer than two maxima in window");
  double n = static_cast<double>(ts.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  return (n * sty - st * sy) / (n * stt - st * st);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_text(const DenseMatrix& M, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << M.rows() << " " << M.cols() << "\n";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out << " ";
      out << format_double(M(i, j));
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

DenseMatrix read_matrix_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  Eigen::Index rows, cols;
  if (!(in >> rows >> cols)) throw IoError("bad matrix header in " + path);
  DenseMatrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(in >> M(i, j))) throw IoError("truncated matrix data in " + path);
  return M;
}

namespace {

void fnv_bytes(std::uint64_t& h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
}

}  // namespace

std::string mesh_hash(const Mesh& mesh) {
  std::uint64_t h = 14695981039346656037ull;
  fnv_bytes(h, &mesh.dim, sizeof(mesh.dim));
  for (const Vec2& v : mesh.vertices) {
    double c[2] = {v.x(), v.y()};
    fnv_bytes(h, c, sizeof(c));
  }
  for (const auto& e : mesh.elements) fnv_bytes(h, e.data(), sizeof(int) * 3);
  for (int d : mesh.dof_map) fnv_bytes(h, &d, sizeof(d));
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void write_outputs(const std::vector<DiagnosticsRecord>& series,
                   const std::vector<Snapshot>& snapshots,
                   const std::vector<std::pair<std::string, std::string>>& resolved,
                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir);

  {
    std::ofstream csv(out_dir + "/diagnostics.csv");
    if (!csv) throw IoError("cannot write " + out_dir + "/diagnostics.csv");
    csv << "t,electric_energy,mass,total_energy,entropy,rank,l2_error,wall_ms\n";
    for (const auto& r : series) {
      csv << format_double(r.t) << "," << format_double(r.electric_energy) << ","
          << format_double(r.mass) << "," << format_double(r.total_energy) << ","
          << format_double(r.entropy) << "," << r.rank << ","
          << (r.l2_error ? format_double(*r.l2_error) : std::string()) << ","
          << format_double(r.wall_ms) << "\n";
    }
  }

  for (size_t i = 0; i < snapshots.size(); ++i) {
    const Snapshot& s = snapshots[i];
    std::ostringstream dir;
    dir << out_dir << "/snapshot_" << i << "_t" << format_double(s.state.t);
    fs::create_directories(dir.str(), ec);
    if (ec) throw IoError("cannot create snapshot directory " + dir.str());
    write_matrix_text(s.state.X, dir.str() + "/X.mat");
    write_matrix_text(s.state.S, dir.str() + "/S.mat");
    write_matrix_text(s.state.V, dir.str() + "/V.mat");
    std::ofstream meta(dir.str() + "/meta.txt");
    meta << "t = " << format_double(s.state.t) << "\n"
         << "rank = " << s.state.rank() << "\n"
         << "x_mesh_hash = " << s.x_mesh_hash << "\n"
         << "v_mesh_hash = " << s.v_mesh_hash << "\n";
  }

  std::ofstream res(out_dir + "/scenario.resolved.txt");
  if (!res) throw IoError("cannot write scenario.resolved.txt in " + out_dir);
  for (const auto& [k, v] : resolved) res << k << " = " << v << "\n";
}

}  // namespace dlrv
