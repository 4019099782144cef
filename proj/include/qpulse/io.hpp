// CSV / JSON output helpers shared by the scenario runners and the CLI.
#pragma once

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "qpulse/analysis.hpp"
#include "qpulse/dynamics.hpp"
#include "qpulse/frames.hpp"

namespace qpulse {

using json = nlohmann::json;

inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + tmp);
    f << text;
  }
  std::filesystem::rename(tmp, path);
}

// time + one column per named observable; complex series get _re/_im pairs.
inline void save_trajectory_csv(const Trajectory& traj,
                                const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f.precision(12);
  std::vector<bool> is_real(traj.names.size());
  f << "t";
  for (size_t k = 0; k < traj.names.size(); ++k) {
    is_real[k] = traj.series[k].imag().cwiseAbs().maxCoeff() < 1e-12;
    if (is_real[k]) f << ',' << traj.names[k];
    else f << ',' << traj.names[k] << "_re," << traj.names[k] << "_im";
  }
  f << '\n';
  for (size_t i = 0; i < traj.sample_times.size(); ++i) {
    f << traj.sample_times[i];
    for (size_t k = 0; k < traj.names.size(); ++k) {
      if (is_real[k]) f << ',' << traj.series[k][i].real();
      else f << ',' << traj.series[k][i].real() << ',' << traj.series[k][i].imag();
    }
    f << '\n';
  }
}

inline void save_wigner_csv(const WignerField& field,
                            const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f.precision(12);
  f << "x,p,W\n";
  for (int ix = 0; ix < field.grid.points; ++ix)
    for (int ip = 0; ip < field.grid.points; ++ip)
      f << field.grid.coord(ix) << ',' << field.grid.coord(ip) << ','
        << field.values(ix, ip) << '\n';
}

inline void save_variance_scan_csv(const std::vector<std::pair<double, double>>& scan,
                                   const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f.precision(12);
  f << "phi,var\n";
  for (const auto& [phi, var] : scan) f << phi << ',' << var << '\n';
}

// time + the nine complex entries of M(t), row major, as _re/_im pairs.
inline void save_mode_matrix_csv(const ModeMatrix& mm,
                                 const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f.precision(12);
  f << "t";
  for (int r = 1; r <= 3; ++r)
    for (int c = 1; c <= 3; ++c)
      f << ",M" << r << c << "_re,M" << r << c << "_im";
  f << '\n';
  for (int i = 0; i < mm.grid.steps; ++i) {
    f << mm.grid.time(i);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        f << ',' << mm.M[i](r, c).real() << ',' << mm.M[i](r, c).imag();
    f << '\n';
  }
}

// Flat binary state snapshot: uint64 dimension header then row-major complex
// doubles (re, im interleaved).
inline void save_state_binary(const DensityMatrix& rho,
                              const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  const std::uint64_t n = static_cast<std::uint64_t>(rho.mat.rows());
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < n; ++j) {
      const double re = rho.mat(i, j).real(), im = rho.mat(i, j).imag();
      f.write(reinterpret_cast<const char*>(&re), sizeof(re));
      f.write(reinterpret_cast<const char*>(&im), sizeof(im));
    }
}

inline DensityMatrix load_state_binary(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!f || n == 0 || n > static_cast<std::uint64_t>(kMaxTotalDim))
    throw ConfigError("bad state file header: " + path.string());
  Mat m(n, n);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < n; ++j) {
      double re, im;
      f.read(reinterpret_cast<char*>(&re), sizeof(re));
      f.read(reinterpret_cast<char*>(&im), sizeof(im));
      m(i, j) = cx(re, im);
    }
  if (!f) throw ConfigError("truncated state file: " + path.string());
  return {single_mode_space(FockWindow(0, static_cast<int>(n))), m};
}

}  // namespace qpulse
