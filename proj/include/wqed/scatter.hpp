#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "wqed/green.hpp"
#include "wqed/wavepacket.hpp"

namespace wqed {

struct UpperBound {
  double P_ub = 0.0;
  double Omega_star = 0.0;
};

struct DesignMatrices {
  double Omega = 0.0;
  CMat S;  // N_b x N
  CMat X;  // N x N
};

struct DesignResult {
  TwoPhotonWavepacket packet;
  CVec target;
  CVec c_in;
  CVec c_out;            // S(Omega0) applied to the normalized input coefficients
  double fidelity = 0.0;  // |<target|c_out>|^2 / (|target|^2 |c_out|^2)
  double fidelity_finite_delta = 0.0;  // same, from the finite-Delta bound-state density
  CVec P;                               // finite-Delta trapping probabilities
  double condition_number = 0.0;
  double Omega0 = 0.0;
  double Delta = 0.0;
  nlohmann::json to_json() const;
};

// Two-photon scattering off a fixed system: T-matrix, trapping amplitudes and
// probabilities, and the superposition design matrices.
//
// Gamma_a(Omega - w_a; nu1, nu2) = sum_n u_n^a(Omega) xi_n(nu1) xi_n(nu2) with
// u^a(Omega) = -4 pi sum_m eps_m^a* xi_m^*(Omega - w_a) [T^{-1}(Omega)]_{m,.}.
class Scatterer {
 public:
  explicit Scatterer(OverlapTable tab, const GreenOptions& green_opt = {},
                     double pole_guard = 1e-6);

  const OverlapTable& overlaps() const { return tab_; }
  const TMatrixEvaluator& tmatrix() const { return T_; }
  int n_bound() const { return tab_.n_bound(); }
  int n_emitters() const { return tab_.n_emitters(); }

  CMat t_matrix(double Omega) const { return T_(Omega); }
  // Throws NumericalError near a pole of T.
  cplx gamma_amplitude(int alpha, double w, double nu1, double nu2) const;
  // Row vectors u^a(Omega) stacked (N_b x N); zero at the poles of T where T^{-1} -> 0.
  CMat U(double Omega) const;
  CMat X(double Omega) const;

  // 1/2 int |Gamma_a(Omega - w_a; nu, Omega - nu)|^2 dnu
  double pub_objective(int alpha, double Omega) const;
  // Scan over 2 w_a +/- half_width (in gamma_max; 0: all reachable total energies)
  // with a step resolving the delay structure, then local refinement.
  UpperBound upper_bound(int alpha, double half_width = 0.0) const;

  TwoPhotonWavepacket optimal_wavepacket(int alpha, double Delta,
                                         std::optional<double> Omega0 = std::nullopt) const;
  TwoPhotonWavepacket superposition_packet(const CVec& c, double Omega0, double Delta) const;

  double norm2(const TwoPhotonWavepacket& p) const;
  void normalize(TwoPhotonWavepacket& p) const;

  // rho_ab = int psi~_a(w) psi~_b(w)^* dw over the scattered photon; diag = P_a
  CMat bound_density(const TwoPhotonWavepacket& p) const;
  std::vector<double> trapping_probabilities(const TwoPhotonWavepacket& p) const;
  double trapping_probability(int alpha, const TwoPhotonWavepacket& p) const;
  // Amplitude of (bound state a, photon at w) for a structured packet, one entry per a.
  CVec output_amplitudes(const TwoPhotonWavepacket& p, double w) const;

  DesignMatrices design_matrices(double Omega) const;
  // Throws NumericalError when cond(S) > max_condition.
  DesignResult design_input(const CVec& target, double Omega0, double Delta,
                            double max_condition = 1e6) const;

 private:
  template <class F>
  void omega_quadrature(const Envelope& env, F&& f) const;

  OverlapTable tab_;
  TMatrixEvaluator T_;
  double panel_ = 0.25;  // nu quadrature panel width
};

}  // namespace wqed
