// Truncated Fock-space operator algebra: windowed ladder operators, tensor
// embedding, canonical states and density-matrix diagnostics.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpulse {

using cx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr cx kI{0.0, 1.0};

// Hard cap on composite dimensions; dense storage only.
inline constexpr int kMaxFockIndex = 1 << 20;
inline constexpr long kMaxTotalDim = 4096;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AccuracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A contiguous slice [offset, offset+size) of the Fock ladder of one mode.
// offset = 0 is an ordinary truncation.
struct FockWindow {
  int offset = 0;
  int size = 1;

  FockWindow() = default;
  FockWindow(int offset_, int size_) : offset(offset_), size(size_) {
    if (offset < 0 || size < 1 || offset + size > kMaxFockIndex)
      throw ConfigError("FockWindow: need offset >= 0, size >= 1");
  }
  bool contains(int n) const { return n >= offset && n < offset + size; }
  int top() const { return offset + size - 1; }
};

// Ordered tensor factors; index 0 is the slowest (leftmost) Kronecker slot.
// Convention used throughout: u-mode, scatterer, v-mode from slowest to
// fastest, so operator files are bit-comparable across runs.
struct CompositeSpace {
  std::vector<FockWindow> windows;

  CompositeSpace() = default;
  explicit CompositeSpace(std::vector<FockWindow> w) : windows(std::move(w)) {
    if (windows.empty()) throw ConfigError("CompositeSpace: no subsystems");
    if (dim() > kMaxTotalDim)
      throw ConfigError("CompositeSpace: total dimension " +
                        std::to_string(dim()) + " exceeds cap " +
                        std::to_string(kMaxTotalDim));
  }

  int subsystems() const { return static_cast<int>(windows.size()); }
  long dim() const {
    long d = 1;
    for (const auto& w : windows) d *= w.size;
    return d;
  }
  // Stride of subsystem k in the flattened index (leftmost slowest).
  long stride(int k) const {
    long s = 1;
    for (int j = k + 1; j < subsystems(); ++j) s *= windows[j].size;
    return s;
  }
  bool operator==(const CompositeSpace& o) const {
    if (windows.size() != o.windows.size()) return false;
    for (size_t k = 0; k < windows.size(); ++k)
      if (windows[k].offset != o.windows[k].offset ||
          windows[k].size != o.windows[k].size)
        return false;
    return true;
  }
};

inline CompositeSpace single_mode_space(FockWindow w) {
  return CompositeSpace({w});
}

// Dense complex operator tagged with the space it lives on and the subsystems
// it acts on nontrivially.
struct OperatorMatrix {
  CompositeSpace space;
  Mat mat;
  std::vector<int> acts_on;
};

struct DensityMatrix {
  CompositeSpace space;
  Mat mat;
};

struct StateDiagnostics {
  double hermiticity_residual = 0.0;  // max |rho - rho^dag|
  double trace_error = 0.0;           // |tr rho - 1|
  double min_eigenvalue = 0.0;
};

inline StateDiagnostics diagnose(const DensityMatrix& rho) {
  StateDiagnostics d;
  d.hermiticity_residual =
      (rho.mat - rho.mat.adjoint()).cwiseAbs().maxCoeff();
  d.trace_error = std::abs(rho.mat.trace() - cx(1.0));
  Eigen::SelfAdjointEigenSolver<Mat> es(
      (0.5 * (rho.mat + rho.mat.adjoint())).eval(),
      Eigen::EigenvaluesOnly);
  d.min_eigenvalue = es.eigenvalues().minCoeff();
  return d;
}

inline void require_valid(const DensityMatrix& rho, double herm_tol = 1e-10,
                          double trace_tol = 1e-8, double eig_tol = 1e-8) {
  const auto d = diagnose(rho);
  if (d.hermiticity_residual > herm_tol)
    throw AccuracyError("density matrix not Hermitian, residual " +
                        std::to_string(d.hermiticity_residual));
  if (d.trace_error > trace_tol)
    throw AccuracyError("density matrix trace off by " +
                        std::to_string(d.trace_error));
  if (d.min_eigenvalue < -eig_tol)
    throw AccuracyError("density matrix min eigenvalue " +
                        std::to_string(d.min_eigenvalue));
}

// <m|a|n> = sqrt(n) delta_{m,n-1}, restricted to the window.
inline Mat annihilation_matrix(FockWindow w) {
  Mat a = Mat::Zero(w.size, w.size);
  for (int i = 0; i + 1 < w.size; ++i)
    a(i, i + 1) = std::sqrt(double(w.offset + i + 1));
  return a;
}

inline OperatorMatrix annihilation(FockWindow w) {
  return {single_mode_space(w), annihilation_matrix(w), {0}};
}

// Number operator restricted to the window: diag(offset .. offset+size-1).
inline Mat number_matrix(FockWindow w) {
  Vec d(w.size);
  for (int i = 0; i < w.size; ++i) d[i] = double(w.offset + i);
  return d.asDiagonal();
}

// Tensor-embeds a one-subsystem operator into `target` at slot `index`.
inline Mat embed_matrix(const Mat& op, const CompositeSpace& target,
                        int index) {
  if (index < 0 || index >= target.subsystems())
    throw ConfigError("embed: subsystem index out of range");
  const int d = target.windows[index].size;
  if (op.rows() != d || op.cols() != d)
    throw ConfigError("embed: operator dimension " +
                      std::to_string(op.rows()) + " != window size " +
                      std::to_string(d));
  const long inner = target.stride(index);       // product of faster dims
  long outer = 1;                                // product of slower dims
  for (int k = 0; k < index; ++k) outer *= target.windows[k].size;
  const long n = target.dim();
  Mat out = Mat::Zero(n, n);
  for (long o = 0; o < outer; ++o)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const cx val = op(i, j);
        if (val == cx(0.0)) continue;
        const long rbase = (o * d + i) * inner;
        const long cbase = (o * d + j) * inner;
        for (long f = 0; f < inner; ++f) out(rbase + f, cbase + f) += val;
      }
  return out;
}

inline OperatorMatrix embed(const OperatorMatrix& op,
                            const CompositeSpace& target, int index) {
  if (op.space.subsystems() != 1)
    throw ConfigError("embed: operator must live on a single subsystem");
  return {target, embed_matrix(op.mat, target, index), {index}};
}

// Coefficients <n|alpha> for n in the window, plus the Fock weight the window
// captures out of the full coherent state.
inline std::pair<Vec, double> coherent_amplitudes(cx alpha, FockWindow w) {
  const int top = w.offset + w.size;
  Vec amp(w.size);
  // iterate c_n = e^{-|a|^2/2} a^n / sqrt(n!)
  cx c = std::exp(cx(-std::norm(alpha) / 2.0, 0.0));
  double captured = 0.0;
  for (int n = 0; n < top; ++n) {
    if (n >= w.offset) {
      amp[n - w.offset] = c;
      captured += std::norm(c);
    }
    c *= alpha / std::sqrt(double(n + 1));
  }
  return {amp, captured};
}

// Normalized coherent-state vector restricted to the window.  Requires the
// window to capture at least 1 - 1e-6 of the Fock weight.
inline Vec coherent_vector(cx alpha, FockWindow w,
                           double min_captured = 1.0 - 1e-6) {
  auto [amp, captured] = coherent_amplitudes(alpha, w);
  if (captured < min_captured)
    throw TruncationError("coherent state window captures only " +
                          std::to_string(captured) + " of the Fock weight");
  return amp / std::sqrt(captured);
}

inline DensityMatrix coherent_state(cx alpha, FockWindow w) {
  const Vec v = coherent_vector(alpha, w);
  return {single_mode_space(w), v * v.adjoint()};
}

inline DensityMatrix fock_state(int n, FockWindow w) {
  if (!w.contains(n))
    throw ConfigError("fock_state: n = " + std::to_string(n) +
                      " outside window [" + std::to_string(w.offset) + ", " +
                      std::to_string(w.offset + w.size) + ")");
  Mat rho = Mat::Zero(w.size, w.size);
  rho(n - w.offset, n - w.offset) = 1.0;
  return {single_mode_space(w), rho};
}

inline DensityMatrix vacuum_state(FockWindow w) { return fock_state(w.offset, w); }

// rho_u (x) vacuum (x) vacuum ... on the composite space; `rho_first` lives on
// subsystem 0.
inline DensityMatrix with_vacuum_ancillas(const Mat& rho_first,
                                          const CompositeSpace& space) {
  if (rho_first.rows() != space.windows[0].size)
    throw ConfigError("with_vacuum_ancillas: dimension mismatch");
  const long n = space.dim();
  const long inner = space.stride(0);
  Mat rho = Mat::Zero(n, n);
  for (int i = 0; i < rho_first.rows(); ++i)
    for (int j = 0; j < rho_first.cols(); ++j)
      rho(i * inner, j * inner) = rho_first(i, j);
  return {space, rho};
}

// Partial trace keeping subsystem `keep`.
inline DensityMatrix reduced_density(const DensityMatrix& rho, int keep) {
  const auto& sp = rho.space;
  if (keep < 0 || keep >= sp.subsystems())
    throw ConfigError("reduced_density: bad subsystem index");
  const int d = sp.windows[keep].size;
  const long inner = sp.stride(keep);
  long outer = 1;
  for (int k = 0; k < keep; ++k) outer *= sp.windows[k].size;
  Mat red = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      cx s = 0.0;
      for (long o = 0; o < outer; ++o)
        for (long f = 0; f < inner; ++f)
          s += rho.mat((o * d + i) * inner + f, (o * d + j) * inner + f);
      red(i, j) = s;
    }
  return {single_mode_space(sp.windows[keep]), red};
}

// Populations of the local Fock levels of one subsystem (diagonal of the
// reduced state), without forming the full reduced matrix.
inline RVec level_populations(const Mat& rho, const CompositeSpace& sp,
                              int which) {
  const int d = sp.windows[which].size;
  const long inner = sp.stride(which);
  long outer = 1;
  for (int k = 0; k < which; ++k) outer *= sp.windows[k].size;
  RVec pops = RVec::Zero(d);
  for (int i = 0; i < d; ++i)
    for (long o = 0; o < outer; ++o) {
      const long base = (o * d + i) * inner;
      for (long f = 0; f < inner; ++f) pops[i] += std::real(rho(base + f, base + f));
    }
  return pops;
}

inline cx expectation(const Mat& op, const Mat& rho) {
  return (op * rho).trace();
}

}  // namespace qpulse
