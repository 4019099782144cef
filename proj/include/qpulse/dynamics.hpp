// Time-dependent Lindblad master-equation integration (fixed-step RK4) and
// the Schrodinger-picture cascaded Hamiltonian / jump-operator builders.
#pragma once

#include <functional>
#include <limits>
#include <map>
#include <utility>

#include "qpulse/pulses.hpp"

namespace qpulse {

// D[L] rho = L rho L^dag - (1/2)(L^dag L rho + rho L^dag L)
inline Mat dissipator(const Mat& L, const Mat& rho) {
  const Mat Lr = L * rho;
  const Mat LdL = L.adjoint() * L;
  return Lr * L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
}

inline Mat dissipator(const OperatorMatrix& L, const DensityMatrix& rho) {
  if (!(L.space == rho.space)) throw ConfigError("dissipator: space mismatch");
  return dissipator(L.mat, rho.mat);
}

// Local description of the scatterer: its Hamiltonian builder, lowering
// operator, line coupling rate and any extra local loss operators.
struct SystemSpec {
  int scatterer_dim = 2;
  std::function<Mat(double)> h_s;  // local dim; null means zero
  Mat lowering;                    // local dim
  double gamma = 1.0;
  std::vector<Mat> losses;         // local dim

  static SystemSpec two_level(double gamma) {
    SystemSpec s;
    s.scatterer_dim = 2;
    s.lowering = annihilation_matrix(FockWindow(0, 2));
    s.gamma = gamma;
    return s;
  }
  static SystemSpec kerr_cavity(double gamma, double kerr, int dim) {
    SystemSpec s;
    s.scatterer_dim = dim;
    s.lowering = annihilation_matrix(FockWindow(0, dim));
    s.gamma = gamma;
    if (kerr != 0.0) {
      Mat n2 = number_matrix(FockWindow(0, dim));
      n2 = (n2 * n2).eval();
      s.h_s = [H = Mat((kerr * n2).eval())](double) { return H; };
    }
    return s;
  }
};

// Composite layout used everywhere: subsystem 0 = u-mode, 1 = scatterer,
// 2 = v-mode (slowest to fastest Kronecker index).
inline CompositeSpace cascade_space(FockWindow u, int scatterer_dim,
                                    FockWindow v) {
  return CompositeSpace({u, FockWindow(0, scatterer_dim), v});
}

// Cached constant operator blocks for the Schrodinger-picture cascaded system;
// per-step assembly is scalar-times-matrix accumulation only.
class CascadedSystem {
 public:
  CascadedSystem(SystemSpec spec, CouplingSchedule sched, CompositeSpace space)
      : spec_(std::move(spec)), sched_(std::move(sched)), space_(std::move(space)) {
    if (space_.subsystems() != 3)
      throw ConfigError("CascadedSystem expects a (u, scatterer, v) space");
    if (space_.windows[1].size != spec_.scatterer_dim ||
        space_.windows[1].offset != 0)
      throw ConfigError("CascadedSystem: scatterer window mismatch");
    a_u_ = embed_matrix(annihilation_matrix(space_.windows[0]), space_, 0);
    c_ = embed_matrix(spec_.lowering, space_, 1);
    a_v_ = embed_matrix(annihilation_matrix(space_.windows[2]), space_, 2);
    b_uc_ = a_u_.adjoint() * c_;
    b_cv_ = c_.adjoint() * a_v_;
    b_uv_ = a_u_.adjoint() * a_v_;
    for (const auto& l : spec_.losses)
      losses_.push_back(embed_matrix(l, space_, 1));
    hs_static_ = !spec_.h_s;
  }

  const CompositeSpace& space() const { return space_; }
  const CouplingSchedule& schedule() const { return sched_; }
  const Mat& a_u() const { return a_u_; }
  const Mat& c_op() const { return c_; }
  const Mat& a_v() const { return a_v_; }

  Mat hamiltonian(int j) const {
    const double sg = std::sqrt(spec_.gamma);
    const cx gu = sched_.g_u[j], gvc = std::conj(sched_.g_v[j]);
    Mat x = (0.5 * kI) * (sg * gu * b_uc_ + sg * gvc * b_cv_ + gu * gvc * b_uv_);
    Mat h = x + x.adjoint();
    if (spec_.h_s) h += embed_matrix(spec_.h_s(sched_.grid.time(j)), space_, 1);
    return h;
  }

  Mat jump0(int j) const {
    return std::sqrt(spec_.gamma) * c_ + std::conj(sched_.g_u[j]) * a_u_ +
           std::conj(sched_.g_v[j]) * a_v_;
  }

  // drho/dt at schedule index j (dense evaluation via the effective
  // non-Hermitian Hamiltonian; extra scatterer losses added explicitly).
  void rhs(const Mat& rho, int j, Mat& out) {
    const long n = space_.dim();
    if (heff_.rows() != n) { heff_.resize(n, n); l_.resize(n, n); tmp_.resize(n, n); }
    l_ = jump0(j);
    heff_ = hamiltonian(j) - (0.5 * kI) * (l_.adjoint() * l_).eval();
    tmp_.noalias() = heff_ * rho;
    out = -kI * tmp_;
    out += (-kI * tmp_).adjoint().eval();
    tmp_.noalias() = l_ * rho;
    out.noalias() += tmp_ * l_.adjoint();
    for (const auto& L : losses_) out += dissipator(L, rho);
  }

 private:
  SystemSpec spec_;
  CouplingSchedule sched_;
  CompositeSpace space_;
  Mat a_u_, c_, a_v_, b_uc_, b_cv_, b_uv_;
  std::vector<Mat> losses_;
  bool hs_static_ = true;
  Mat heff_, l_, tmp_;  // scratch
};

// Spec-surface builders (assembled fresh; use CascadedSystem in loops).
inline OperatorMatrix cascaded_hamiltonian(const SystemSpec& spec,
                                           const CouplingSchedule& sched,
                                           const CompositeSpace& space,
                                           double t) {
  CascadedSystem sys(spec, sched, space);
  return {space, sys.hamiltonian(sched.grid.index_of(t)), {0, 1, 2}};
}

inline OperatorMatrix jump_operator_L0(const SystemSpec& spec,
                                       const CouplingSchedule& sched,
                                       const CompositeSpace& space, double t) {
  CascadedSystem sys(spec, sched, space);
  return {space, sys.jump0(sched.grid.index_of(t)), {0, 1, 2}};
}

struct Observable {
  std::string name;
  Mat op;
};

struct IntegrateOptions {
  double trace_tol = 1e-6;
  double leakage_threshold = 1e-4;
  int sample_stride = 1;      // observable sampling, in integrator steps
  int state_stride = 0;       // 0 = no snapshots (final state always kept)
  bool check_leakage = true;
  bool throw_on_trace_drift = true;
};

struct Trajectory {
  TimeGrid grid;              // integration grid
  std::vector<double> sample_times;
  std::vector<std::string> names;
  std::vector<Vec> series;    // one complex series per name
  std::vector<std::pair<double, DensityMatrix>> states;
  DensityMatrix final_state;

  double max_trace_drift = 0.0;
  double max_edge_leakage = 0.0;  // growth of window-edge population vs t=0
  bool leakage_warning = false;
  double min_eigenvalue = 0.0;    // of the final state

  RVec real_series(const std::string& name) const {
    for (size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return series[k].real();
    throw ConfigError("trajectory has no series named " + name);
  }
};

namespace detail {

// Window-edge populations that can grow by truncation: the top of every
// window, plus the bottom of offset windows.
inline std::vector<std::pair<int, int>> truncation_edges(const CompositeSpace& sp) {
  std::vector<std::pair<int, int>> edges;  // (subsystem, local level)
  for (int k = 0; k < sp.subsystems(); ++k) {
    if (sp.windows[k].size < 2) continue;
    edges.push_back({k, sp.windows[k].size - 1});
    if (sp.windows[k].offset > 0) edges.push_back({k, 0});
  }
  return edges;
}

inline double edge_population(const Mat& rho, const CompositeSpace& sp,
                              const std::vector<std::pair<int, int>>& edges,
                              std::vector<double>* per_edge = nullptr) {
  double worst = 0.0;
  for (size_t e = 0; e < edges.size(); ++e) {
    const auto [k, lvl] = edges[e];
    const RVec pops = level_populations(rho, sp, k);
    const double p = pops[lvl];
    if (per_edge) (*per_edge)[e] = p;
    worst = std::max(worst, p);
  }
  return worst;
}

}  // namespace detail

// Fixed-step RK4 over `grid`; the model is sampled at half-steps, i.e. at
// j = 0 .. 2*(steps-1) with t_j = t0 + j*dt/2.  After every step the state is
// re-Hermitized.  Model contract: model.rhs(rho, j, out).
template <class Model>
Trajectory integrate_model(Model& model, const DensityMatrix& rho0,
                           const TimeGrid& grid,
                           const std::vector<Observable>& observables,
                           const IntegrateOptions& opts = {}) {
  const long n = rho0.space.dim();
  if (rho0.mat.rows() != n) throw ConfigError("integrate: state dimension mismatch");

  Trajectory traj;
  traj.grid = grid;
  for (const auto& o : observables) traj.names.push_back(o.name);
  const int nsteps = grid.steps - 1;
  const int nsamp = nsteps / opts.sample_stride + 1;
  std::vector<std::vector<cx>> samp(observables.size());
  for (auto& s : samp) s.reserve(nsamp);

  const auto edges = detail::truncation_edges(rho0.space);
  std::vector<double> edge0(edges.size(), 0.0), edge_now(edges.size(), 0.0);

  Mat rho = rho0.mat;
  Mat k1(n, n), k2(n, n), k3(n, n), k4(n, n), stage(n, n);

  auto take_sample = [&](int step) {
    traj.sample_times.push_back(grid.time(step));
    for (size_t a = 0; a < observables.size(); ++a)
      samp[a].push_back((observables[a].op * rho).trace());
  };
  auto check_state = [&](int step) {
    const double drift = std::abs(rho.trace().real() - 1.0) +
                         std::abs(rho.trace().imag());
    traj.max_trace_drift = std::max(traj.max_trace_drift, drift);
    if (opts.throw_on_trace_drift && drift > opts.trace_tol)
      throw AccuracyError("trace drift " + std::to_string(drift) + " at t = " +
                          std::to_string(grid.time(step)) +
                          "; reduce dt");
    if (opts.check_leakage && !edges.empty()) {
      detail::edge_population(rho, rho0.space, edges, &edge_now);
      for (size_t e = 0; e < edges.size(); ++e) {
        const double growth = edge_now[e] - edge0[e];
        traj.max_edge_leakage = std::max(traj.max_edge_leakage, growth);
      }
      if (traj.max_edge_leakage > opts.leakage_threshold)
        traj.leakage_warning = true;
    }
  };

  if (!edges.empty()) detail::edge_population(rho, rho0.space, edges, &edge0);
  take_sample(0);
  for (int i = 0; i < nsteps; ++i) {
    const int j = 2 * i;
    const double h = grid.dt;
    model.rhs(rho, j, k1);
    stage = rho + (0.5 * h) * k1;
    model.rhs(stage, j + 1, k2);
    stage = rho + (0.5 * h) * k2;
    model.rhs(stage, j + 1, k3);
    stage = rho + h * k3;
    model.rhs(stage, j + 2, k4);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho = (0.5 * (rho + rho.adjoint())).eval();

    if ((i + 1) % opts.sample_stride == 0 || i + 1 == nsteps) {
      take_sample(i + 1);
      check_state(i + 1);
    }
    if (opts.state_stride > 0 && (i + 1) % opts.state_stride == 0)
      traj.states.push_back({grid.time(i + 1), DensityMatrix{rho0.space, rho}});
  }

  traj.series.resize(observables.size());
  for (size_t a = 0; a < observables.size(); ++a)
    traj.series[a] = Eigen::Map<Vec>(samp[a].data(), samp[a].size());
  traj.final_state = DensityMatrix{rho0.space, rho};
  traj.min_eigenvalue = diagnose(traj.final_state).min_eigenvalue;
  return traj;
}

// Generic builder-driven integration (the schedule-free spec surface).
struct BuilderModel {
  TimeGrid grid;  // integration grid; builders are called at t and t + dt/2
  std::function<Mat(double)> H;
  std::vector<std::function<Mat(double)>> Ls;

  void rhs(const Mat& rho, int j, Mat& out) {
    const double t = grid.t0 + 0.5 * j * grid.dt;
    if (H) {
      const Mat h = H(t);
      out.noalias() = -kI * (h * rho);
      out += out.adjoint().eval();
    } else {
      out.setZero(rho.rows(), rho.cols());
    }
    for (const auto& lf : Ls) out += dissipator(lf(t), rho);
  }
};

inline Trajectory integrate(const std::function<Mat(double)>& H,
                            const std::vector<std::function<Mat(double)>>& Ls,
                            const DensityMatrix& rho0, const TimeGrid& grid,
                            const std::vector<Observable>& observables,
                            const IntegrateOptions& opts = {}) {
  BuilderModel model{grid, H, Ls};
  return integrate_model(model, rho0, grid, observables, opts);
}

inline Trajectory integrate_cascaded(CascadedSystem& sys,
                                     const DensityMatrix& rho0,
                                     const TimeGrid& grid,
                                     const std::vector<Observable>& observables,
                                     const IntegrateOptions& opts = {}) {
  // the schedule must resolve the half-steps of the integration grid
  if (std::abs(sys.schedule().grid.dt - 0.5 * grid.dt) > 1e-12 ||
      sys.schedule().grid.steps < 2 * (grid.steps - 1) + 1)
    throw ConfigError("integrate_cascaded: schedule must be sampled at dt/2");
  return integrate_model(sys, rho0, grid, observables, opts);
}

}  // namespace qpulse
