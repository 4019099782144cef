// Interaction-picture machinery: the two-mode frame (general and
// identical-mode forms), the three-mode frame via the mode matrix M(t), and
// the transformed Hamiltonians and jump operators.
#pragma once

#include <array>

#include "qpulse/dynamics.hpp"

namespace qpulse {

// lambda(t): cumulative trapezoid of (1/2) g_u g_v^*.  For identical input
// and output modes this equals -theta(t).
inline Vec lambda_two_mode(const CouplingSchedule& sched) {
  Vec integrand(sched.grid.steps);
  for (int i = 0; i < sched.grid.steps; ++i)
    integrand[i] = 0.5 * sched.g_u[i] * std::conj(sched.g_v[i]);
  return cumulative_trapezoid(integrand, sched.grid.dt);
}

namespace detail {

// Regularized two-mode coefficients for v = u.  Writing the ancilla
// coefficients through the floored couplings keeps them finite at both grid
// ends, where cot(theta) and tan(theta) blow up while u vanishes:
//   u (cot - tan) = -(g_v cos(theta) + g_u sin(theta))
//   u (tan + cot) =   g_u sin(theta) - g_v cos(theta)
struct TwoModeCoefficients {
  Vec jc;       // sqrt(gamma) u(t)           (Jaynes-Cummings strength / sg)
  Vec ancilla;  // u(t) (cot - tan), regularized
  Vec jump_v;   // u(t) (tan + cot), regularized
};

inline TwoModeCoefficients two_mode_coefficients(const CouplingSchedule& s,
                                                 const ModeFunction& u) {
  TwoModeCoefficients c;
  const int n = s.grid.steps;
  c.jc = u.samples;
  c.ancilla.resize(n);
  c.jump_v.resize(n);
  for (int i = 0; i < n; ++i) {
    const double ct = std::cos(s.theta[i]), st = std::sin(s.theta[i]);
    c.ancilla[i] = -(s.g_v[i] * ct + s.g_u[i] * st);
    c.jump_v[i] = s.g_u[i] * st - s.g_v[i] * ct;
  }
  return c;
}

}  // namespace detail

// H(t) = H_s + i sqrt(g) u (a_u^+ c - c^+ a_u)
//            + (i/2) sqrt(g) u (cot - tan) (a_v^+ c - c^+ a_v)   [v = u]
inline OperatorMatrix two_mode_hamiltonian(const SystemSpec& spec,
                                           const CouplingSchedule& sched,
                                           const ModeFunction& u,
                                           const CompositeSpace& space,
                                           double t) {
  const int j = sched.grid.index_of(t);
  const auto co = detail::two_mode_coefficients(sched, u);
  const Mat a_u = embed_matrix(annihilation_matrix(space.windows[0]), space, 0);
  const Mat c = embed_matrix(spec.lowering, space, 1);
  const Mat a_v = embed_matrix(annihilation_matrix(space.windows[2]), space, 2);
  const double sg = std::sqrt(spec.gamma);
  Mat x = kI * sg * (co.jc[j] * (a_u.adjoint() * c) +
                     0.5 * co.ancilla[j] * (a_v.adjoint() * c));
  Mat h = x + x.adjoint();
  if (spec.h_s) h += embed_matrix(spec.h_s(t), space, 1);
  return {space, h, {0, 1, 2}};
}

// General-lambda variant (arbitrary u, v with constant-phase lambda):
// H = H_s + (i sqrt(g)/2) ((g_u cos l^* + g_v sin l^*) a_u^+ c
//                        + (g_v^* cos l - g_u^* sin l) c^+ a_v - h.c.)
inline OperatorMatrix two_mode_hamiltonian(const SystemSpec& spec,
                                           const CouplingSchedule& sched,
                                           const Vec& lambda,
                                           const CompositeSpace& space,
                                           double t) {
  const int j = sched.grid.index_of(t);
  const cx l = lambda[j];
  const cx cl = std::cos(l), sl = std::sin(l);
  const Mat a_u = embed_matrix(annihilation_matrix(space.windows[0]), space, 0);
  const Mat c = embed_matrix(spec.lowering, space, 1);
  const Mat a_v = embed_matrix(annihilation_matrix(space.windows[2]), space, 2);
  const double sg = std::sqrt(spec.gamma);
  const cx au_coeff = sched.g_u[j] * std::conj(cl) + sched.g_v[j] * std::conj(sl);
  const cx av_coeff = std::conj(sched.g_v[j]) * cl - std::conj(sched.g_u[j]) * sl;
  Mat x = (0.5 * kI * sg) *
          (au_coeff * (a_u.adjoint() * c) + av_coeff * (c.adjoint() * a_v));
  Mat h = x + x.adjoint();
  if (spec.h_s) h += embed_matrix(spec.h_s(t), space, 1);
  return {space, h, {0, 1, 2}};
}

// L0(t) = sqrt(g) c - (tan + cot) u(t) a_v   [v = u; no a_u term: the
// travelling mode is lossless in this frame]
inline OperatorMatrix two_mode_jump_operator(const SystemSpec& spec,
                                             const CouplingSchedule& sched,
                                             const ModeFunction& u,
                                             const CompositeSpace& space,
                                             double t) {
  const int j = sched.grid.index_of(t);
  const auto co = detail::two_mode_coefficients(sched, u);
  const Mat c = embed_matrix(spec.lowering, space, 1);
  const Mat a_v = embed_matrix(annihilation_matrix(space.windows[2]), space, 2);
  return {space, std::sqrt(spec.gamma) * c - co.jump_v[j] * a_v, {1, 2}};
}

// Cached two-mode interaction-picture model (identical modes).
class TwoModeSystem {
 public:
  TwoModeSystem(SystemSpec spec, CouplingSchedule sched, const ModeFunction& u,
                CompositeSpace space)
      : spec_(std::move(spec)), sched_(std::move(sched)), space_(std::move(space)) {
    if (space_.subsystems() != 3)
      throw ConfigError("TwoModeSystem expects a (u, scatterer, v) space");
    co_ = detail::two_mode_coefficients(sched_, u);
    a_u_ = embed_matrix(annihilation_matrix(space_.windows[0]), space_, 0);
    c_ = embed_matrix(spec_.lowering, space_, 1);
    a_v_ = embed_matrix(annihilation_matrix(space_.windows[2]), space_, 2);
    b_uc_ = a_u_.adjoint() * c_ - c_.adjoint() * a_u_;
    b_vc_ = a_v_.adjoint() * c_ - c_.adjoint() * a_v_;
    for (const auto& l : spec_.losses)
      losses_.push_back(embed_matrix(l, space_, 1));
  }

  const CompositeSpace& space() const { return space_; }
  const CouplingSchedule& schedule() const { return sched_; }
  const Mat& a_u() const { return a_u_; }
  const Mat& c_op() const { return c_; }
  const Mat& a_v() const { return a_v_; }

  Mat hamiltonian(int j) const {
    const double sg = std::sqrt(spec_.gamma);
    Mat h = kI * sg * (co_.jc[j] * b_uc_ + 0.5 * co_.ancilla[j] * b_vc_);
    if (spec_.h_s) h += embed_matrix(spec_.h_s(sched_.grid.time(j)), space_, 1);
    return h;
  }
  Mat jump0(int j) const {
    return std::sqrt(spec_.gamma) * c_ - co_.jump_v[j] * a_v_;
  }

  void rhs(const Mat& rho, int j, Mat& out) {
    const long n = space_.dim();
    if (l_.rows() != n) { l_.resize(n, n); heff_.resize(n, n); tmp_.resize(n, n); }
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
  detail::TwoModeCoefficients co_;
  Mat a_u_, c_, a_v_, b_uc_, b_vc_;
  std::vector<Mat> losses_;
  Mat l_, heff_, tmp_;
};

// ---------------------------------------------------------------------------
// Three-mode frame
// ---------------------------------------------------------------------------

struct ModeMatrix {
  TimeGrid grid;
  std::vector<Eigen::Matrix3cd> M;  // one per grid point, M[0] = I
  double unitarity_residual = 0.0;  // max ||M^+ M - I||_max over stored points
};

namespace detail {

inline Eigen::Matrix3cd coupling_generator(cx gu, cx gv, double gamma) {
  const double sg = std::sqrt(gamma);
  Eigen::Matrix3cd f;
  f << 0.0, 0.5 * sg * gu, 0.5 * gu * std::conj(gv),
      -0.5 * sg * std::conj(gu), 0.0, 0.5 * sg * std::conj(gv),
      -0.5 * std::conj(gu) * gv, -0.5 * sg * gv, 0.0;
  return f;
}

// exp of an anti-Hermitian 3x3 via the eigendecomposition of i*Omega.
inline Eigen::Matrix3cd exp_antihermitian(const Eigen::Matrix3cd& omega) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(kI * omega);
  Eigen::Vector3cd phases;
  for (int k = 0; k < 3; ++k)
    phases[k] = std::exp(cx(0.0, -es.eigenvalues()[k]));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

}  // namespace detail

// Solves dM/dt = F(t) M, M(t0) = I, stepping by two schedule cells so that
// midpoint samples are exact.  Each step applies exp(Omega) with a
// fourth-order Magnus Omega (Simpson quadrature plus the leading commutator);
// since Omega is anti-Hermitian the stored M is unitary to roundoff even
// across the regularization switch points of the couplings.  Returned on the
// 2*dt grid (half the schedule resolution).
inline ModeMatrix mode_matrix_three(const CouplingSchedule& sched, double gamma) {
  const int n = sched.grid.steps;
  const int nsteps = (n - 1) / 2;
  const double h = 2.0 * sched.grid.dt;
  ModeMatrix out;
  out.grid = TimeGrid(sched.grid.t0, h, nsteps + 1);
  out.M.resize(nsteps + 1);
  Eigen::Matrix3cd m = Eigen::Matrix3cd::Identity();
  out.M[0] = m;
  const Eigen::Matrix3cd id = Eigen::Matrix3cd::Identity();
  for (int k = 0; k < nsteps; ++k) {
    const int r = 2 * k;
    const auto f0 = detail::coupling_generator(sched.g_u[r], sched.g_v[r], gamma);
    const auto f1 = detail::coupling_generator(sched.g_u[r + 1], sched.g_v[r + 1], gamma);
    const auto f2 = detail::coupling_generator(sched.g_u[r + 2], sched.g_v[r + 2], gamma);
    const Eigen::Matrix3cd d = f2 - f0;
    const Eigen::Matrix3cd omega =
        (h / 6.0) * (f0 + 4.0 * f1 + f2) + (h * h / 12.0) * (d * f1 - f1 * d);
    m = (detail::exp_antihermitian(omega) * m).eval();
    out.M[k + 1] = m;
    out.unitarity_residual =
        std::max(out.unitarity_residual,
                 (m.adjoint() * m - id).cwiseAbs().maxCoeff());
  }
  if (out.unitarity_residual > 1e-8)
    throw AccuracyError("mode matrix unitarity drift " +
                        std::to_string(out.unitarity_residual));
  return out;
}

// phi_row(t) = sum_j M(row, j) phi_j(0) as an embedded operator; row is
// 1-based per the (a_u, c, a_v) ordering.
inline OperatorMatrix transform_mode_operator(int row,
                                              const Eigen::Matrix3cd& m_t,
                                              const CompositeSpace& space) {
  if (row < 1 || row > 3) throw ConfigError("transform_mode_operator: row in {1,2,3}");
  if (space.subsystems() != 3)
    throw ConfigError("transform_mode_operator: need a 3-subsystem space");
  const long n = space.dim();
  Mat op = Mat::Zero(n, n);
  for (int j = 0; j < 3; ++j)
    op += m_t(row - 1, j) *
          embed_matrix(annihilation_matrix(space.windows[j]), space, j);
  return {space, op, {0, 1, 2}};
}

// K (c^+(t) c(t))^2 with c(t) = M_21 a_u(0) + M_22 c(0) + M_23 a_v(0).
inline OperatorMatrix three_mode_hamiltonian_kerr(double kerr,
                                                  const Eigen::Matrix3cd& m_t,
                                                  const CompositeSpace& space) {
  const OperatorMatrix c_t = transform_mode_operator(2, m_t, space);
  Mat n_c = c_t.mat.adjoint() * c_t.mat;
  return {space, kerr * (n_c * n_c), {0, 1, 2}};
}

// Frame transform of the cascaded jump operator: coefficients M^T w with
// w = (g_u^*, sqrt(gamma), g_v^*).
inline std::array<cx, 3> three_mode_jump_coefficients(
    const Eigen::Matrix3cd& m_t, cx g_u, cx g_v, double gamma) {
  const std::array<cx, 3> w{std::conj(g_u), cx(std::sqrt(gamma)), std::conj(g_v)};
  std::array<cx, 3> c{};
  for (int j = 0; j < 3; ++j)
    c[j] = w[0] * m_t(0, j) + w[1] * m_t(1, j) + w[2] * m_t(2, j);
  return c;
}

inline OperatorMatrix three_mode_jump_operator(const SystemSpec& spec,
                                               const CouplingSchedule& sched,
                                               const Eigen::Matrix3cd& m_t,
                                               const CompositeSpace& space,
                                               double t) {
  const int j = sched.grid.index_of(t);
  const auto c =
      three_mode_jump_coefficients(m_t, sched.g_u[j], sched.g_v[j], spec.gamma);
  const long n = space.dim();
  Mat op = Mat::Zero(n, n);
  for (int k = 0; k < 3; ++k)
    op += c[k] * embed_matrix(annihilation_matrix(space.windows[k]), space, k);
  return {space, op, {0, 1, 2}};
}

// Accumulated Kerr phase K int_0^T |M_21|^4 dt and the cat-state conditions.
inline double m21_quartic_integral(const ModeMatrix& mm, double T) {
  double s = 0.0;
  const int last = std::min(mm.grid.index_of(T), mm.grid.steps - 1);
  for (int i = 1; i <= last; ++i) {
    const double a = std::pow(std::abs(mm.M[i - 1](1, 0)), 4);
    const double b = std::pow(std::abs(mm.M[i](1, 0)), 4);
    s += 0.5 * mm.grid.dt * (a + b);
  }
  return s;
}

inline double analytic_cat_phase(double kerr, const ModeMatrix& mm, double T) {
  return kerr * m21_quartic_integral(mm, T);
}

// K for which a single pass produces the pi/2 even-odd phase difference.
inline double single_pass_cat_kerr(const ModeMatrix& mm, double T) {
  return 0.5 * M_PI / m21_quartic_integral(mm, T);
}

// Number of passes N with N K int |M21|^4 = pi/2; infinite for K = 0.
inline double cat_pass_count(double kerr, const ModeMatrix& mm, double T) {
  if (kerr == 0.0) return std::numeric_limits<double>::infinity();
  return 0.5 * M_PI / (kerr * m21_quartic_integral(mm, T));
}

// ---------------------------------------------------------------------------
// Structured fast path for the three-mode Kerr master equation.
//
// Every operator in this picture is a polynomial in the three embedded ladder
// operators with scalar time-dependent coefficients, so the right-hand side
// is evaluated by banded ladder applications in O(dim^2) instead of dense
// matrix products.
// ---------------------------------------------------------------------------

class TripartiteLadderKernels {
 public:
  explicit TripartiteLadderKernels(const CompositeSpace& space) {
    if (space.subsystems() != 3)
      throw ConfigError("TripartiteLadderKernels: need 3 subsystems");
    for (int m = 0; m < 3; ++m) {
      d_[m] = space.windows[m].size;
      str_[m] = space.stride(m);
      sq_[m].resize(std::max(d_[m] - 1, 0));
      for (int i = 0; i + 1 < d_[m]; ++i)
        sq_[m][i] = std::sqrt(double(space.windows[m].offset + i + 1));
    }
    n_ = space.dim();
  }

  long dim() const { return n_; }

  // Y = (z0 a_u + z1 c + z2 a_v) X
  void annih_left(const std::array<cx, 3>& z, const Mat& x, Mat& y) const {
    y.setZero(n_, n_);
    for (long col = 0; col < n_; ++col) {
      auto xc = x.col(col);
      auto yc = y.col(col);
      for (int m = 0; m < 3; ++m) {
        if (z[m] == cx(0.0)) continue;
        const long blocks = n_ / (d_[m] * str_[m]);
        for (long b = 0; b < blocks; ++b)
          for (int i = 0; i + 1 < d_[m]; ++i) {
            const long base = b * d_[m] * str_[m] + i * str_[m];
            yc.segment(base, str_[m]) +=
                (z[m] * sq_[m][i]) * xc.segment(base + str_[m], str_[m]);
          }
      }
    }
  }

  // Y = (z0 a_u^+ + z1 c^+ + z2 a_v^+) X
  void creat_left(const std::array<cx, 3>& z, const Mat& x, Mat& y) const {
    y.setZero(n_, n_);
    for (long col = 0; col < n_; ++col) {
      auto xc = x.col(col);
      auto yc = y.col(col);
      for (int m = 0; m < 3; ++m) {
        if (z[m] == cx(0.0)) continue;
        const long blocks = n_ / (d_[m] * str_[m]);
        for (long b = 0; b < blocks; ++b)
          for (int i = 1; i < d_[m]; ++i) {
            const long base = b * d_[m] * str_[m] + i * str_[m];
            yc.segment(base, str_[m]) +=
                (z[m] * sq_[m][i - 1]) * xc.segment(base - str_[m], str_[m]);
          }
      }
    }
  }

  // Y = X (z0 a_u + z1 c + z2 a_v)
  void annih_right(const std::array<cx, 3>& z, const Mat& x, Mat& y) const {
    y.setZero(n_, n_);
    for (int m = 0; m < 3; ++m) {
      if (z[m] == cx(0.0)) continue;
      const long blocks = n_ / (d_[m] * str_[m]);
      for (long b = 0; b < blocks; ++b)
        for (int jm = 1; jm < d_[m]; ++jm)
          for (long f = 0; f < str_[m]; ++f) {
            const long colj = b * d_[m] * str_[m] + jm * str_[m] + f;
            y.col(colj) += (z[m] * sq_[m][jm - 1]) * x.col(colj - str_[m]);
          }
    }
  }

  // Y = X (z0 a_u^+ + z1 c^+ + z2 a_v^+)
  void creat_right(const std::array<cx, 3>& z, const Mat& x, Mat& y) const {
    y.setZero(n_, n_);
    for (int m = 0; m < 3; ++m) {
      if (z[m] == cx(0.0)) continue;
      const long blocks = n_ / (d_[m] * str_[m]);
      for (long b = 0; b < blocks; ++b)
        for (int jm = 0; jm + 1 < d_[m]; ++jm)
          for (long f = 0; f < str_[m]; ++f) {
            const long colj = b * d_[m] * str_[m] + jm * str_[m] + f;
            y.col(colj) += (z[m] * sq_[m][jm]) * x.col(colj + str_[m]);
          }
    }
  }

 private:
  int d_[3];
  long str_[3];
  std::vector<double> sq_[3];
  long n_ = 0;
};

// Master equation in the three-mode interaction picture:
//   drho/dt = -i K [ (c^+(t) c(t))^2 , rho ] + D[L0(t)] rho
// with c(t) = sum_j M_2j phi_j(0) and L0(t) = sum_j c_j(t) phi_j(0).
class ThreeModeKerrModel {
 public:
  ThreeModeKerrModel(const CompositeSpace& space, const ModeMatrix& mm,
                     const CouplingSchedule& sched_on_mm_grid, double gamma,
                     double kerr)
      : kernels_(space), kerr_(kerr) {
    if (!(sched_on_mm_grid.grid == mm.grid))
      throw ConfigError("ThreeModeKerrModel: schedule and mode matrix grids differ");
    const int n = mm.grid.steps;
    mrow_.resize(n);
    cvec_.resize(n);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < 3; ++k) mrow_[j][k] = mm.M[j](1, k);
      cvec_[j] = three_mode_jump_coefficients(
          mm.M[j], sched_on_mm_grid.g_u[j], sched_on_mm_grid.g_v[j], gamma);
    }
    grid_ = mm.grid;
  }

  const TimeGrid& coefficient_grid() const { return grid_; }

  void rhs(const Mat& rho, int j, Mat& out) {
    const long n = kernels_.dim();
    if (x1_.rows() != n) {
      x1_.resize(n, n); x2_.resize(n, n); x3_.resize(n, n);
    }
    const auto& m = mrow_[j];
    const auto mc = conj3(m);
    if (kerr_ != 0.0) {
      kernels_.annih_left(m, rho, x1_);   // c rho
      kernels_.creat_left(mc, x1_, x2_);  // n rho
      kernels_.annih_left(m, x2_, x1_);
      kernels_.creat_left(mc, x1_, x2_);  // n^2 rho
      out = (-kI * kerr_) * x2_;
      out += ((-kI * kerr_) * x2_).adjoint().eval();
    } else {
      out.setZero(n, n);
    }
    const auto& c = cvec_[j];
    const auto cc = conj3(c);
    kernels_.annih_left(c, rho, x1_);    // L rho
    kernels_.creat_right(cc, x1_, x2_);  // L rho L^+
    out += x2_;
    kernels_.creat_left(cc, x1_, x3_);   // L^+ L rho
    out -= 0.5 * x3_;
    out -= (0.5 * x3_).adjoint().eval();
  }

 private:
  static std::array<cx, 3> conj3(const std::array<cx, 3>& z) {
    return {std::conj(z[0]), std::conj(z[1]), std::conj(z[2])};
  }
  TripartiteLadderKernels kernels_;
  double kerr_;
  TimeGrid grid_;
  std::vector<std::array<cx, 3>> mrow_, cvec_;
  Mat x1_, x2_, x3_;
};

}  // namespace qpulse
