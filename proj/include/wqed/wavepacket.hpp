#pragma once

#include <cstdint>
#include <random>

#include "wqed/spectral.hpp"

namespace wqed {

// f(Omega) = (pi Delta^2)^{-1/4} exp(-(Omega - Omega0)^2 / (2 Delta^2)); int f^2 = 1.
struct Envelope {
  double Omega0 = 0.0;
  double Delta = 1.0;
  double operator()(double Omega) const;
};

enum class PacketKind { optimal, superposition, grid };

// Two-photon amplitude psi(nu1, nu2).
//  optimal / superposition: norm * f(nu1 + nu2) * sum_k c_k xi_k^*(nu1) xi_k^*(nu2)
//  grid: samples on a uniform square grid, symmetric, normalized by sum |psi|^2 dnu^2 = 1
struct TwoPhotonWavepacket {
  PacketKind kind = PacketKind::superposition;
  int alpha = -1;  // bound state targeted by an optimal packet
  Envelope envelope;
  CVec c;
  double norm = 1.0;

  double grid_min = 0.0;
  double grid_step = 0.0;
  CMat grid;

  bool structured() const { return kind != PacketKind::grid; }
  cplx amplitude(const OverlapTable& tab, double nu1, double nu2) const;
  std::uint64_t hash() const;
};

// Symmetrizes and normalizes the samples. An all-zero grid stays zero.
TwoPhotonWavepacket make_grid_packet(double nu_min, double step, CMat values);

// Sum of a few random Gaussian blobs around (center, center), symmetrized. Blob
// widths lie in [max(3 step, 0.1 hw), 0.2 hw] and blobs stay 4.5 widths inside
// the grid, so n >= 31 is needed for well-resolved packets.
TwoPhotonWavepacket random_grid_packet(std::mt19937_64& rng, double center, double half_width,
                                       int n);

// Random coefficient vector, central energy in [Omega_lo, Omega_hi] and Delta in
// [delta_lo, delta_hi]; not normalized (use Scatterer::normalize).
TwoPhotonWavepacket random_structured_packet(std::mt19937_64& rng, int n_emitters,
                                             double Omega_lo, double Omega_hi, double delta_lo,
                                             double delta_hi);

}  // namespace wqed
