// Observables and state diagnostics: quadrature variances, Wigner functions,
// fidelities and mode overlaps.  Quadrature convention (fixed):
// x = (a + a^+)/sqrt(2), p = i(a^+ - a)/sqrt(2); coherent-state variance 1/2.
#pragma once

#include "qpulse/fock.hpp"
#include "qpulse/pulses.hpp"

namespace qpulse {

struct ModeMoments {
  cx a;        // <a>
  cx a2;       // <a^2>
  double n;    // <a^+ a>
};

inline ModeMoments mode_moments(const DensityMatrix& rho_mode) {
  if (rho_mode.space.subsystems() != 1)
    throw ConfigError("mode_moments: single-mode state required");
  const Mat a = annihilation_matrix(rho_mode.space.windows[0]);
  ModeMoments m;
  m.a = (a * rho_mode.mat).trace();
  m.a2 = (a * a * rho_mode.mat).trace();
  m.n = ((a.adjoint() * a * rho_mode.mat).trace()).real();
  return m;
}

// Var(x_phi) with x_phi = cos(phi) x - sin(phi) p = (e^{i phi} a + h.c.)/sqrt(2):
//   Var = Re(e^{2 i phi} <a^2>) + <n> + 1/2 - 2 Re(e^{i phi} <a>)^2
inline double quadrature_variance_from_moments(const ModeMoments& m, double phi) {
  const cx u = std::exp(cx(0.0, phi));
  const double mean = M_SQRT2 * std::real(u * m.a);
  return std::real(u * u * m.a2) + m.n + 0.5 - mean * mean;
}

inline double quadrature_variance(const DensityMatrix& rho_mode, double phi) {
  return quadrature_variance_from_moments(mode_moments(rho_mode), phi);
}

struct MinVariance {
  double phi = 0.0;
  double variance = 0.0;
};

// Coarse scan of [0, pi) at 1e-3 rad followed by golden-section refinement to
// 1e-5 rad.  Var(x_phi) is a sinusoid plus constant in 2*phi, so the scan
// cannot miss the basin.
inline MinVariance min_variance(const DensityMatrix& rho_mode) {
  const ModeMoments m = mode_moments(rho_mode);
  auto var = [&m](double phi) { return quadrature_variance_from_moments(m, phi); };

  const double step = 1e-3;
  double best_phi = 0.0, best = var(0.0);
  for (double phi = step; phi < M_PI; phi += step) {
    const double v = var(phi);
    if (v < best - 1e-15) { best = v; best_phi = phi; }
  }
  double lo = best_phi - step, hi = best_phi + step;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = var(x1), f2 = var(x2);
  while (hi - lo > 1e-5) {
    if (f1 < f2) { hi = x2; x2 = x1; f2 = f1; x1 = hi - gr * (hi - lo); f1 = var(x1); }
    else { lo = x1; x1 = x2; f1 = f2; x2 = lo + gr * (hi - lo); f2 = var(x2); }
  }
  const double phi_star = 0.5 * (lo + hi);
  const double v_star = var(phi_star);
  if (v_star < best) return {phi_star < 0 ? phi_star + M_PI : phi_star, v_star};
  return {best_phi, best};
}

// Symmetric uniform phase-space grid.
struct PhaseSpaceGrid {
  double extent = 6.0;  // [-extent, extent] on both axes
  int points = 121;

  double coord(int i) const {
    return -extent + 2.0 * extent * i / (points - 1);
  }
  double cell() const { return 2.0 * extent / (points - 1); }
};

struct WignerField {
  PhaseSpaceGrid grid;
  Eigen::MatrixXd values;   // values(ix, ip)
  double edge_weight = 0.0; // state weight on the top Fock level
  bool accuracy_warning = false;

  double integral() const {
    // trapezoid in both directions
    Eigen::VectorXd wx = Eigen::VectorXd::Ones(grid.points);
    wx[0] = wx[grid.points - 1] = 0.5;
    return grid.cell() * grid.cell() * wx.dot(values * wx);
  }
  double minimum() const { return values.minCoeff(); }
};

namespace detail {

// D(alpha) = exp(alpha a^+ - alpha^* a) built exactly unitary in the window
// via the eigendecomposition of the Hermitian generator.
inline Mat displacement(cx alpha, const Mat& a) {
  const Mat gen = kI * (alpha * a.adjoint() - std::conj(alpha) * a);  // Hermitian
  Eigen::SelfAdjointEigenSolver<Mat> es(gen);
  Vec phases(gen.rows());
  for (int k = 0; k < gen.rows(); ++k)
    phases[k] = std::exp(cx(0.0, -es.eigenvalues()[k]));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

// Displaced-parity evaluation
//   W(x, p) = (1/pi) tr[ rho D(alpha) Pi D^+(alpha) ],  alpha = (x + i p)/sqrt(2)
// normalized so that int W dx dp = 1.
inline WignerField wigner(const DensityMatrix& rho_mode,
                          const PhaseSpaceGrid& grid = {}) {
  if (rho_mode.space.subsystems() != 1)
    throw ConfigError("wigner: single-mode state required");
  const FockWindow w = rho_mode.space.windows[0];
  const Mat a = annihilation_matrix(w);
  RVec parity(w.size);
  for (int i = 0; i < w.size; ++i)
    parity[i] = ((w.offset + i) % 2 == 0) ? 1.0 : -1.0;

  WignerField field;
  field.grid = grid;
  field.values.resize(grid.points, grid.points);
  const RVec pops = level_populations(rho_mode.mat, rho_mode.space, 0);
  field.edge_weight = pops[w.size - 1];
  field.accuracy_warning = field.edge_weight > 1e-4;

  for (int ix = 0; ix < grid.points; ++ix) {
    const double x = grid.coord(ix);
    for (int ip = 0; ip < grid.points; ++ip) {
      const double p = grid.coord(ip);
      const cx alpha = cx(x, p) / M_SQRT2;
      const Mat d = detail::displacement(alpha, a);
      // tr[rho D Pi D^+] = sum_n parity_n (D^+ rho D)_nn
      const Mat e = rho_mode.mat * d;
      cx s = 0.0;
      for (int n = 0; n < w.size; ++n)
        s += parity[n] * d.col(n).dot(e.col(n));  // dot() conjugates the lhs
      field.values(ix, ip) = std::real(s) / M_PI;
    }
  }
  return field;
}

// <target| rho |target>
inline double state_fidelity(const DensityMatrix& rho, const Vec& target_pure) {
  if (rho.mat.rows() != target_pure.size())
    throw ConfigError("state_fidelity: dimension mismatch");
  const double n2 = target_pure.squaredNorm();
  return std::real(target_pure.dot(rho.mat * target_pure)) / n2;
}

// Yurke-Stoler cat (|alpha> + i|-alpha>)/norm in the given window.
inline Vec yurke_stoler_vector(cx alpha, FockWindow w) {
  auto [plus, cap_p] = coherent_amplitudes(alpha, w);
  auto [minus, cap_m] = coherent_amplitudes(-alpha, w);
  Vec cat = plus + kI * minus;
  return cat / cat.norm();
}

}  // namespace qpulse
