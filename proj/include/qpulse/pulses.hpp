// Pulse mode functions on uniform time grids and the virtual-cavity coupling
// schedules derived from them.  All rates are in units of gamma, times in
// units of 1/gamma.
#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qpulse/fock.hpp"

namespace qpulse {

struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  int steps = 0;  // number of sample points; span = (steps-1)*dt

  TimeGrid() = default;
  TimeGrid(double t0_, double dt_, int steps_) : t0(t0_), dt(dt_), steps(steps_) {
    if (dt <= 0.0 || steps < 2) throw ConfigError("TimeGrid: need dt > 0, steps >= 2");
  }
  double time(int i) const { return t0 + i * dt; }
  double t_end() const { return time(steps - 1); }
  // Grid refined by an integer factor (same span).
  TimeGrid refined(int factor) const {
    return TimeGrid(t0, dt / factor, (steps - 1) * factor + 1);
  }
  bool operator==(const TimeGrid& o) const {
    return t0 == o.t0 && dt == o.dt && steps == o.steps;
  }
  int index_of(double t, double tol = 1e-9) const {
    const double x = (t - t0) / dt;
    const int i = static_cast<int>(std::lround(x));
    if (i < 0 || i >= steps || std::abs(x - i) > tol / dt)
      throw ConfigError("time " + std::to_string(t) + " not on grid");
    return i;
  }
};

inline TimeGrid standard_grid(double t_end = 12.0, double dt = 1e-3) {
  return TimeGrid(0.0, dt, static_cast<int>(std::lround(t_end / dt)) + 1);
}

// Cumulative trapezoid integral; out[0] = 0.
inline RVec cumulative_trapezoid(const RVec& y, double dt) {
  RVec out(y.size());
  out[0] = 0.0;
  for (int i = 1; i < y.size(); ++i)
    out[i] = out[i - 1] + 0.5 * dt * (y[i] + y[i - 1]);
  return out;
}

inline Vec cumulative_trapezoid(const Vec& y, double dt) {
  Vec out(y.size());
  out[0] = 0.0;
  for (int i = 1; i < y.size(); ++i)
    out[i] = out[i - 1] + 0.5 * dt * (y[i] + y[i - 1]);
  return out;
}

struct ModeFunction {
  TimeGrid grid;
  Vec samples;

  double norm2() const {
    RVec a2 = samples.cwiseAbs2();
    double s = 0.0;
    for (int i = 1; i < a2.size(); ++i) s += 0.5 * grid.dt * (a2[i] + a2[i - 1]);
    return s;
  }
};

inline void normalize(ModeFunction& m) {
  const double n2 = m.norm2();
  if (!(n2 > 0.0)) throw ConfigError("cannot normalize a null mode function");
  m.samples /= std::sqrt(n2);
}

// Normalized Gaussian pulse centred at t_p with width tau.  The grid must
// cover at least [t_p - 4 tau, t_p + 4 tau].
inline ModeFunction gaussian_mode(double t_p, double tau, const TimeGrid& grid) {
  if (grid.t0 > t_p - 4.0 * tau || grid.t_end() < t_p + 4.0 * tau) {
    // report how much of the pulse the grid captures
    const double lo = (grid.t0 - t_p) / tau, hi = (grid.t_end() - t_p) / tau;
    const double captured = 0.5 * (std::erf(hi) - std::erf(lo));
    throw TruncationError("gaussian_mode: grid captures only " +
                          std::to_string(captured) + " of the pulse norm");
  }
  ModeFunction m{grid, Vec(grid.steps)};
  const double amp = 1.0 / (std::sqrt(tau) * std::pow(M_PI, 0.25));
  for (int i = 0; i < grid.steps; ++i) {
    const double x = (grid.time(i) - t_p) / tau;
    m.samples[i] = amp * std::exp(-0.5 * x * x);
  }
  normalize(m);
  return m;
}

// Coupling regularization.  Both g_u (Eq. for the upstream out-coupling) and
// g_v (downstream in-coupling) have vanishing denominators at the grid ends;
// the couplings are zeroed while the relevant cumulative norm is below
// `epsilon`.  The on/off indices are snapped to multiples of `snap` grid
// cells so that fixed-step integrators only ever see the switch exactly at a
// step boundary.
inline constexpr double kDefaultEpsilon = 1e-10;

inline Vec coupling_gu(const ModeFunction& u, double epsilon = kDefaultEpsilon,
                       int snap = 1) {
  const RVec F = cumulative_trapezoid(u.samples.cwiseAbs2().eval(), u.grid.dt);
  const int n = u.grid.steps;
  int cut = n;
  for (int i = 0; i < n; ++i)
    if (1.0 - F[i] < epsilon) { cut = (i / snap) * snap; break; }
  Vec g = Vec::Zero(n);
  for (int i = 0; i < cut; ++i)
    g[i] = std::conj(u.samples[i]) / std::sqrt(std::max(1.0 - F[i], epsilon));
  return g;
}

inline Vec coupling_gv(const ModeFunction& v, double epsilon = kDefaultEpsilon,
                       int snap = 1) {
  const RVec F = cumulative_trapezoid(v.samples.cwiseAbs2().eval(), v.grid.dt);
  const int n = v.grid.steps;
  int start = n;
  for (int i = 0; i < n; ++i)
    if (F[i] >= epsilon) { start = ((i + snap - 1) / snap) * snap; break; }
  Vec g = Vec::Zero(n);
  for (int i = start; i < n; ++i)
    g[i] = -std::conj(v.samples[i]) / std::sqrt(F[i]);
  return g;
}

// theta(t) = arcsin sqrt(int_0^t |u|^2), clamped to [0, pi/2].
inline RVec theta_schedule(const ModeFunction& u) {
  const RVec F = cumulative_trapezoid(u.samples.cwiseAbs2().eval(), u.grid.dt);
  RVec th(F.size());
  for (int i = 0; i < F.size(); ++i)
    th[i] = std::asin(std::sqrt(std::clamp(F[i], 0.0, 1.0)));
  return th;
}

// Precomputed g_u(t), g_v(t), theta(t), lambda(t) on one grid.
struct CouplingSchedule {
  TimeGrid grid;
  Vec g_u, g_v;
  RVec theta;
  Vec lambda;      // cumulative trapezoid of (1/2) g_u g_v^*
  double epsilon = kDefaultEpsilon;
};

inline CouplingSchedule make_schedule(const ModeFunction& u,
                                      const ModeFunction& v,
                                      double epsilon = kDefaultEpsilon,
                                      int snap = 1) {
  if (!(u.grid == v.grid))
    throw ConfigError("make_schedule: u and v must share a grid");
  CouplingSchedule s;
  s.grid = u.grid;
  s.epsilon = epsilon;
  s.g_u = coupling_gu(u, epsilon, snap);
  s.g_v = coupling_gv(v, epsilon, snap);
  s.theta = theta_schedule(u);
  Vec integrand(s.grid.steps);
  for (int i = 0; i < s.grid.steps; ++i)
    integrand[i] = 0.5 * s.g_u[i] * std::conj(s.g_v[i]);
  s.lambda = cumulative_trapezoid(integrand, s.grid.dt);
  return s;
}

// Empty-cavity reflection r(w) = (i(w - w_c) + gamma/2) / (i(w - w_c) - gamma/2).
// The filter is applied in frequency space with 2x zero padding (the filter is
// causal; padding keeps the ring-down tail from wrapping onto the early grid).
struct FilteredMode {
  ModeFunction mode;      // renormalized on the grid
  double captured = 1.0;  // norm fraction remaining inside the grid
};

inline FilteredMode cavity_output_mode(const ModeFunction& u, double gamma,
                                       double omega_c,
                                       double tail_tol = 1e-4) {
  const int n = u.grid.steps;
  const int np = 2 * n;
  std::vector<cx> buf(np, cx(0.0));
  for (int i = 0; i < n; ++i) buf[i] = u.samples[i];
  fftw_plan fwd = fftw_plan_dft_1d(
      np, reinterpret_cast<fftw_complex*>(buf.data()),
      reinterpret_cast<fftw_complex*>(buf.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(fwd);
  fftw_destroy_plan(fwd);
  // FFTW_BACKWARD implements sum_k x_k e^{+2 pi i k j / N}: the physics
  // convention u(w) = int u(t) e^{+i w t} dt used by r(w).
  const double dw = 2.0 * M_PI / (np * u.grid.dt);
  for (int k = 0; k < np; ++k) {
    const double w = (k <= np / 2 ? k : k - np) * dw;
    buf[k] *= (kI * (w - omega_c) + gamma / 2.0) / (kI * (w - omega_c) - gamma / 2.0);
  }
  fftw_plan bwd = fftw_plan_dft_1d(
      np, reinterpret_cast<fftw_complex*>(buf.data()),
      reinterpret_cast<fftw_complex*>(buf.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(bwd);
  fftw_destroy_plan(bwd);

  FilteredMode out;
  out.mode.grid = u.grid;
  out.mode.samples = Vec(n);
  for (int i = 0; i < n; ++i) out.mode.samples[i] = buf[i] / double(np);
  out.captured = out.mode.norm2();  // |r| = 1, so everything lost is the tail
  if (1.0 - out.captured > tail_tol)
    throw TruncationError("cavity_output_mode: " +
                          std::to_string(1.0 - out.captured) +
                          " of the filtered pulse falls beyond the grid");
  out.mode.samples /= std::sqrt(out.captured);
  return out;
}

// Discrete inner product <a|b> (same weights as the normalization).
inline cx mode_overlap(const ModeFunction& a, const ModeFunction& b) {
  if (!(a.grid == b.grid)) throw ConfigError("mode_overlap: grid mismatch");
  cx s = 0.0;
  for (int i = 1; i < a.grid.steps; ++i)
    s += 0.5 * a.grid.dt *
         (std::conj(a.samples[i]) * b.samples[i] +
          std::conj(a.samples[i - 1]) * b.samples[i - 1]);
  return s;
}

// --- CSV import/export: header "t,re,im", one row per sample ---

inline void save_mode_csv(const ModeFunction& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  f.precision(17);
  f << "t,re,im\n";
  for (int i = 0; i < m.grid.steps; ++i)
    f << m.grid.time(i) << ',' << m.samples[i].real() << ','
      << m.samples[i].imag() << '\n';
}

inline ModeFunction load_mode_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  std::string line;
  std::getline(f, line);  // header
  std::vector<double> ts;
  std::vector<cx> vals;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double t, re, im;
    char comma;
    if (!(ss >> t >> comma >> re >> comma >> im))
      throw ConfigError("bad CSV row in " + path + ": " + line);
    ts.push_back(t);
    vals.push_back(cx(re, im));
  }
  if (ts.size() < 2) throw ConfigError("mode CSV too short: " + path);
  const double dt = ts[1] - ts[0];
  for (size_t i = 1; i < ts.size(); ++i)
    if (std::abs(ts[i] - ts[i - 1] - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw ConfigError("mode CSV grid is not uniform: " + path);
  ModeFunction m{TimeGrid(ts[0], dt, static_cast<int>(ts.size())),
                 Eigen::Map<Vec>(vals.data(), vals.size())};
  return m;
}

}  // namespace qpulse
