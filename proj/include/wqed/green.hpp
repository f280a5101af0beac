#pragma once

#include <vector>

#include "wqed/spectral.hpp"

namespace wqed {

struct BoundTerm {
  cplx coeff;    // eps_m^a conj(eps_n^a)
  double omega;  // omega_a
};

// G_{mn}(t) = sum_a eps_m^a eps_n^a* e^{-i w_a t} + G_c(t). The continuum part is
// stored demodulated: continuum[k] = G_c(k dt) exp(i omega_ref k dt).
struct GreenFunction {
  int m = 0, n = 0;
  std::vector<BoundTerm> bound_part;
  double dt = 0.0;
  double omega_ref = 0.0;
  std::vector<cplx> continuum;
  double tail_abs = 0.0;  // max |G_c| over the last stretch of the grid

  double t_max() const { return dt * (continuum.empty() ? 0.0 : continuum.size() - 1.0); }
  cplx bound_at(double t) const;
  cplx continuum_at(double t) const;  // linear interpolation, 0 beyond t_max
  cplx operator()(double t) const { return bound_at(t) + continuum_at(t); }
};

enum class GreenRoute { automatic, delay, spectral };

struct GreenOptions {
  GreenRoute route = GreenRoute::automatic;  // automatic: delay route for feedback systems
  double dt = 0.0;          // 0: min(0.005/gamma, smallest delay gap / 8)
  double t_min = 40.0;      // in units of 1/gamma_max
  double t_cap = 2000.0;    // in units of 1/gamma_max
  double tail_tol = 1e-10;  // stop once |G_c| stays below this over the last stretch
};

struct GreenTable {
  int N = 0;
  double gamma = 1.0;  // rate scale for tolerances
  GreenRoute route = GreenRoute::delay;
  std::vector<GreenFunction> g;  // row major, g[m * N + n]
  const GreenFunction& at(int m, int n) const { return g[m * N + n]; }
  double tail_abs() const;
};

GreenTable green_table(const OverlapTable& tab, const GreenOptions& opt = {});
GreenFunction green_function(const OverlapTable& tab, int m, int n, const GreenOptions& opt = {});

// Single-excitation amplitudes c_m(t) with c(0) = e_source for a feedback system,
// from the exact delay equation. Returned demodulated by exp(i omega_ref t);
// result[k * N + m] is c_m at t = k dt.
std::vector<cplx> delay_response(const SystemSpec& sys, int source, double dt, long n_steps,
                                 double omega_ref);

// Frequency-domain route: G_c(t) = int_W xi_m xi_n^* e^{-iwt} dw by zero-padded DFT
// (padding 4, Tukey taper on the outer 5% of the window).
GreenTable green_table_spectral(const OverlapTable& tab, double omega_ref);

// T(Omega + i0+) = int_0^inf G(t)^2 e^{i Omega t} dt elementwise, split into the
// analytic bound-bound term and a Filon quadrature of 2 G_b G_c + G_c^2 with an
// exponential tail correction.
class TMatrixEvaluator {
 public:
  explicit TMatrixEvaluator(GreenTable table, double pole_guard = 1e-6);
  // Throws NumericalError within pole_guard * gamma of a bound-bound pole.
  CMat operator()(double Omega) const;
  bool near_pole(double Omega) const;
  const GreenTable& green() const { return table_; }

 private:
  GreenTable table_;
  double pole_guard_ = 0.0;
  std::vector<std::vector<cplx>> F_;  // demodulated 2 G_b G_c + G_c^2 by e^{2 i omega_ref t}
  std::vector<cplx> bb_coeff_;         // flattened per (m,n): products over (a,b)
  std::vector<double> bb_omega_;
  int n_pairs_ = 0;
  double omega_ref_ = 0.0;
  double dt_ = 0.0;
  std::vector<double> tail_rate_;
};

// Independent check of TMatrixEvaluator: damped integrals int_0^inf G^2 e^{(i Omega - eta) t}
// of the full G for eta in {eta0, 2 eta0, ...}, extrapolated to eta = 0 by Neville.
std::vector<CMat> t_matrix_eta_oracle(const OverlapTable& tab, const std::vector<double>& Omegas,
                                      double eta0 = 0.002, int n_eta = 5);

}  // namespace wqed
