#pragma once

#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

#include "wqed/scatter.hpp"

namespace wqed {

// Uniform lattice in the frozen-photon frame: y_i = x_min + i h, h = dt.
struct Lattice {
  double h = 0.01;
  double x_min = -80.0;
  double x_max = 10.0;
  long n_steps = 0;
  bool double_precision = false;  // two-photon field stored in double instead of float

  long size() const { return static_cast<long>(std::llround((x_max - x_min) / h)) + 1; }
  double y(long i) const { return x_min + i * h; }
  long index(double y) const { return static_cast<long>(std::llround((y - x_min) / h)); }
};

// Checks h > 0, mirror delays aligned to the lattice and sources inside the
// domain for the whole run. Throws ConfigError.
void check_lattice(const Lattice& lat, const SystemSpec& sys);

// Symmetric two-photon field in packed lower-triangular storage.
template <class S>
struct PackedSymmetric {
  long n = 0;
  std::vector<std::complex<S>> d;
  void resize(long n_) {
    n = n_;
    d.assign(static_cast<std::size_t>(n) * (n + 1) / 2, std::complex<S>(0));
  }
  static std::size_t at(long i, long j) {
    if (i < j) std::swap(i, j);
    return static_cast<std::size_t>(i) * (i + 1) / 2 + j;
  }
  std::complex<S>& operator()(long i, long j) { return d[at(i, j)]; }
  std::complex<S> operator()(long i, long j) const { return d[at(i, j)]; }
};

// Two-excitation state: psi(y1, y2) two photons, psi_n(y) photon + emitter n,
// psi_mn both emitters. Norm: 2 int int |psi|^2 + sum int |psi_n|^2 + 4 sum_{m<n} |psi_mn|^2.
// Amplitudes are stored with the carrier w_c removed: psi2 e^{-i w_c (y1 + y2)},
// psi_n e^{-i w_c (y - t)}, psi_mn e^{2 i w_c t}.
struct FieldState {
  Lattice lattice;
  long step = 0;
  double omega_c = 0.0;    // carrier, the mean emitter frequency
  double init_norm = 0.0;  // discrete norm of the sampled packet before renormalization
  double t() const { return step * lattice.h; }
  PackedSymmetric<float> psi2f;
  PackedSymmetric<double> psi2d;
  std::vector<std::vector<cplx>> psi1;  // [n][i]
  CMat psiE;                            // symmetric, zero diagonal
  // optional record for eval_psi2: history[k][n][i] is the psi_n deposited at step k
  bool keep_history = false;
  std::vector<std::vector<std::vector<cplx>>> history;
  std::vector<std::vector<cplx>> psi2_initial;  // dense copy, only with keep_history

  cplx psi2(long i, long j) const {
    return lattice.double_precision ? psi2d(i, j) : cplx(psi2f(i, j));
  }
};

struct NormBreakdown {
  double two_photon = 0.0;
  double one_photon = 0.0;
  double emitters = 0.0;
  double total() const { return two_photon + one_photon + emitters; }
};
NormBreakdown norm(const FieldState& s);

struct PositionSupport {
  double X_lo = 0.0, X_hi = 0.0;  // centre-of-mass range (before the shift)
  double r_max = 0.0;             // |y1 - y2| range
};

// Position-space picture of a structured or grid wavepacket.
class PositionPacket {
 public:
  PositionPacket(const Scatterer& sc, const TwoPhotonWavepacket& p, double h);
  // psi(y1, y2) for the packet translated by X_shift along y1 + y2
  cplx operator()(double y1, double y2, double X_shift) const;
  const PositionSupport& support() const { return support_; }
  bool empty() const { return empty_; }
  bool structured() const { return structured_; }
  double h() const { return h_; }
  // structured: out[c] = e^{-2i w_c X} psi at r = l h, X = X0 + c h (unshifted X), c < count
  void diagonal(long l, double X0, long count, double omega_c, cplx* out) const;
  // grid: psi(y1, y2) = A(y1) . B(y2), both evaluated at y - X_shift
  void factors(double y, CVec& A, CVec& B) const;

 private:
  bool empty_ = false;
  bool structured_ = true;
  double h_ = 0.0;
  PositionSupport support_;
  // structured: psi = sum_q w_q e^{i Omega_q X} K_q(r)
  std::vector<double> Omega_;
  std::vector<cplx> wq_;
  std::vector<std::vector<cplx>> K_;  // K_[q][l], r = l h, l >= 0
  // grid: low-rank sum_k A_k(y1) B_k(y2) through sampled exponentials
  double nu_min_ = 0.0, dnu_ = 0.0;
  CMat Uk_, Vk_;  // n_grid x rank, singular values folded in
};

struct RunOptions {
  double clearance = 5.0;    // gap between packet support and -t_N, in 1/gamma
  double settle = 30.0;      // extra time after the sources leave the packet, in 1/gamma
  double h = 0.01;           // in 1/gamma
  bool double_precision = false;
  bool keep_history = false;
  std::vector<double> snapshot_times;
  int snapshot_stride = 0;   // 0: automatic (about 300 cells per axis)
  int norm_every = 0;        // record the norm every this many steps (0: about 200 samples)
};

// Plans a lattice that holds the packet left of -t_N and keeps all sources
// inside for a run long enough to flush the packet through the emitters.
struct RunPlan {
  Lattice lattice;
  double X_shift = 0.0;
  double T_final = 0.0;
};
RunPlan plan_run(const SystemSpec& sys, const PositionSupport& sup, const RunOptions& opt);

FieldState zero_state(const SystemSpec& sys, const Lattice& lat, bool keep_history = false);
FieldState init_from_wavepacket(const PositionPacket& pp, const SystemSpec& sys,
                                const Lattice& lat, double X_shift, bool keep_history = false);

// One step of length h: sources move one cell to the left. Returns the change of
// the two-photon part of the norm caused by the deposits.
double step(FieldState& s, const SystemSpec& sys);

// Two-photon amplitude from the initial condition and the stored psi_n history.
cplx eval_psi2(const FieldState& s, const SystemSpec& sys, long i, long j);

struct Snapshot {
  double t = 0.0;
  long stride = 1;
  std::vector<double> y;
  std::vector<std::vector<double>> abs_psi2;  // [i][j]
};

struct RunResult {
  FieldState state;
  std::vector<std::pair<double, double>> norm_history;  // (t, total norm)
  double norm_drift = 0.0;                               // max |N(t) - N(0)|
  double residual_emitters = 0.0;                        // max |psi_mn(T)|
  std::vector<Snapshot> snapshots;
  double init_norm_before_renorm = 0.0;
  double X_shift = 0.0;
  std::vector<std::string> warnings;
};

// Takes the state by value: move large states in.
RunResult run(FieldState initial, const SystemSpec& sys, long n_steps, const RunOptions& opt = {});

struct TrapExtraction {
  std::vector<std::vector<cplx>> psi_tilde;  // [a][i]
  std::vector<double> P;
  CMat rho;               // int psi~_a psi~_b^* dy
  double residual = 0.0;  // relative least-squares residual
  double fidelity(const CVec& target) const;
};
TrapExtraction extract_trapping(const FieldState& s, const OverlapTable& tab);

// Full pipeline: position transform, lattice plan, run, extraction.
struct SimulationReport {
  RunPlan plan;
  RunResult result;
  TrapExtraction trap;
  nlohmann::json manifest(const SystemSpec& sys, const TwoPhotonWavepacket& p) const;
};
SimulationReport simulate(const Scatterer& sc, const TwoPhotonWavepacket& p,
                          const RunOptions& opt = {});

}  // namespace wqed
