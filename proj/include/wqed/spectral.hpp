#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "wqed/model.hpp"

namespace wqed {

// f(x) = prefactor * exp(-i omega x) * coeffs[k] on segment k. Segments are
// separated by sorted breakpoints; at a breakpoint the two one-sided values are
// averaged.
struct PiecewiseWave {
  double omega = 0.0;
  double prefactor = 1.0;
  std::vector<double> breaks;  // size K
  std::vector<cplx> coeffs;    // size K + 1
  cplx operator()(double x) const;
  // int |f|^2 over the finite segments (outer segments must vanish or are skipped)
  double inner_norm2() const;
};

// int_a^b exp(-i k x) dx
cplx segment_phase_integral(double k, double a, double b);

// int f g^* over the finite segments [breaks.front(), breaks.back()].
cplx inner_finite(const PiecewiseWave& f, const PiecewiseWave& g);

struct MatrixPair {
  CMat M;
  CVec f;
};

// Feedback: closed form. Custom: principal-value self-energy over the window.
MatrixPair build_M(const SystemSpec& sys, double w);

struct ScatteringState {
  double omega = 0.0;
  CVec b;     // raw solution of M b = f
  CVec beta;  // b / sqrt(2 pi), the emitter amplitudes of psi_w
  std::vector<cplx> segment_coeffs;  // {1, C_{N-1}^-, ..., C_1^-, C_0, C_1^+, ..., C_N^+}
  cplx tau;
  PiecewiseWave profile;  // Psi_w(x); empty breaks for custom couplings
};

// Throws NumericalError when M(w) is singular.
ScatteringState solve_scattering_state(const SystemSpec& sys, double w);

struct BoundState {
  double omega_b = 0.0;
  CVec v;
  std::vector<cplx> segment_coeffs;  // {B_{N-1}^-, ..., B_1^-, B_0, B_1^+, ..., B_{N-1}^+}
  PiecewiseWave profile;
  double norm_check = 0.0;    // |sum |v|^2 + int |Phi|^2 - 1|
  double consistency = 0.0;   // |sum_n v_n V_n(omega_b)|
};

struct RejectedCandidate {
  double omega = 0.0;
  double det_abs = 0.0;
  double consistency = 0.0;
  std::string reason;
};

struct BoundSearch {
  std::vector<BoundState> states;
  std::vector<RejectedCandidate> rejected;
  bool degenerate_construction = false;
};

struct BoundSearchOptions {
  double consistency_tol = 1e-8;   // times sqrt(gamma_max)
  double det_tol = 1e-8;           // relative to the scan's typical |det M|
  double scan_step = 0.0;          // 0: automatic
  double degeneracy_tol = 1e-12;
};

BoundSearch find_bound_states(const SystemSpec& sys, const BoundSearchOptions& opt = {});

// Builds the normalized bound state for a given frequency and emitter vector.
BoundState make_bound_state(const SystemSpec& sys, double omega_b, const CVec& v);

cplx bound_state_profile(const BoundState& s, double x);

// Full inner products (emitter part + waveguide part).
cplx inner(const BoundState& a, const BoundState& b);
cplx inner(const BoundState& a, const ScatteringState& s);
// Non-delta part of [psi_w, psi_v^dagger] for w != v, Abel regularized; zero
// for an exact eigenbasis.
cplx scattering_offdiag(const ScatteringState& a, const ScatteringState& b);

// xi_n(w) = conj(beta_n(w)), with the removable singularities at bound-state
// frequencies filled by a symmetric two-sided limit.
CVec xi_exact(const SystemSpec& sys, double w, const std::vector<double>& singular = {});

struct OverlapTable {
  SystemSpec system;
  std::vector<double> bound_omegas;  // distinct bound-state frequencies
  std::vector<double> row_omegas;    // frequency of each eps row
  CMat eps;  // N_b x N, eps(a, n) = conj(v_n^a)
  double grid_min = 0.0;
  double grid_step = 0.0;
  std::vector<CVec> xi_samples;
  bool exact = true;  // closed-form evaluation available (feedback family)

  int n_emitters() const { return system.size(); }
  int n_bound() const { return static_cast<int>(eps.rows()); }
  double grid_point(int i) const { return grid_min + i * grid_step; }
  // Exact evaluation for feedback systems; cubic interpolation of the samples for custom ones.
  CVec xi(double w) const;
  cplx xi(int n, double w) const { return xi(w)(n); }
};

// Samples xi on a uniform grid over the system window (>= 4001 points).
OverlapTable overlaps(const SystemSpec& sys, const std::vector<BoundState>& states,
                      int n_grid = 4001);
OverlapTable overlaps_serial(const SystemSpec& sys, const std::vector<BoundState>& states,
                             int n_grid = 4001);

// Sum_a |eps_n^a|^2 + int |xi_n|^2 over [w_lo, w_hi]. With add_tail (feedback
// systems only) the part outside the interval is added: exact quadrature over a
// further 1000 gamma on each side and the averaged 1/w^2 law beyond.
struct Completeness {
  double bound_part = 0.0;
  double continuum_part = 0.0;
  double tail_estimate = 0.0;
  double total() const { return bound_part + continuum_part + tail_estimate; }
};
Completeness completeness(const OverlapTable& tab, int n, double w_lo, double w_hi,
                          bool add_tail = true);

nlohmann::json bound_states_to_json(const std::vector<BoundState>& states);
nlohmann::json overlaps_to_json(const OverlapTable& tab);

}  // namespace wqed
