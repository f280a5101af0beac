#include "wqed/wavepacket.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace wqed {

double Envelope::operator()(double Omega) const {
  double d = (Omega - Omega0) / Delta;
  return std::pow(kPi * Delta * Delta, -0.25) * std::exp(-0.5 * d * d);
}

cplx TwoPhotonWavepacket::amplitude(const OverlapTable& tab, double nu1, double nu2) const {
  if (kind == PacketKind::grid) {
    // bilinear interpolation inside the grid, zero outside
    const int n = static_cast<int>(grid.rows());
    double p = (nu1 - grid_min) / grid_step, q = (nu2 - grid_min) / grid_step;
    if (n < 2 || p < 0 || q < 0 || p > n - 1 || q > n - 1) return 0.0;
    int i = std::min(static_cast<int>(p), n - 2), j = std::min(static_cast<int>(q), n - 2);
    double u = p - i, v = q - j;
    return (1 - u) * (1 - v) * grid(i, j) + u * (1 - v) * grid(i + 1, j) +
           (1 - u) * v * grid(i, j + 1) + u * v * grid(i + 1, j + 1);
  }
  CVec x1 = tab.xi(nu1), x2 = tab.xi(nu2);
  cplx s = 0.0;
  for (int k = 0; k < c.size(); ++k) s += c(k) * std::conj(x1(k)) * std::conj(x2(k));
  return norm * envelope(nu1 + nu2) * s;
}

std::uint64_t TwoPhotonWavepacket::hash() const {
  // FNV-1a over the defining numbers
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  int k = static_cast<int>(kind);
  mix(&k, sizeof k);
  mix(&alpha, sizeof alpha);
  mix(&envelope.Omega0, sizeof(double));
  mix(&envelope.Delta, sizeof(double));
  mix(&norm, sizeof norm);
  if (c.size()) mix(c.data(), sizeof(cplx) * c.size());
  mix(&grid_min, sizeof grid_min);
  mix(&grid_step, sizeof grid_step);
  if (grid.size()) mix(grid.data(), sizeof(cplx) * grid.size());
  return h;
}

TwoPhotonWavepacket make_grid_packet(double nu_min, double step, CMat values) {
  if (values.rows() != values.cols()) throw ConfigError("grid wavepacket must be square");
  if (!(step > 0)) throw ConfigError("grid wavepacket step must be positive");
  TwoPhotonWavepacket p;
  p.kind = PacketKind::grid;
  p.grid_min = nu_min;
  p.grid_step = step;
  CMat sym = 0.5 * (values + values.transpose());
  double n2 = sym.squaredNorm() * step * step;
  if (n2 > 0) sym /= std::sqrt(n2);
  p.grid = std::move(sym);
  return p;
}

TwoPhotonWavepacket random_grid_packet(std::mt19937_64& rng, double center, double half_width,
                                       int n) {
  if (n < 2 || !(half_width > 0)) throw ConfigError("random grid packet: need n >= 2 and half_width > 0");
  const double nu_min = center - half_width;
  const double step = 2.0 * half_width / (n - 1);
  // blobs are resolved by at least three samples and sit 4.5 widths inside the grid
  const double s_lo = std::max(3.0 * step, 0.1 * half_width);
  const double s_hi = std::max(s_lo, 0.2 * half_width);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_real_distribution<double> W(s_lo, s_hi);
  std::normal_distribution<double> G(0.0, 1.0);
  CMat v = CMat::Zero(n, n);
  const int blobs = 3;
  for (int b = 0; b < blobs; ++b) {
    const double s = W(rng);
    const double reach = std::max(0.0, half_width - 4.5 * s);
    const double m1 = center + reach * U(rng);
    const double m2 = center + reach * U(rng);
    const cplx amp(G(rng), G(rng));
    const double tilt = 3.0 * U(rng);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double x = nu_min + i * step, y = nu_min + j * step;
        double e = ((x - m1) * (x - m1) + (y - m2) * (y - m2)) / (2 * s * s);
        v(i, j) += amp * std::exp(-e) * std::exp(kI * tilt * (x + y));
      }
  }
  return make_grid_packet(nu_min, step, v);
}

TwoPhotonWavepacket random_structured_packet(std::mt19937_64& rng, int n_emitters,
                                             double Omega_lo, double Omega_hi, double delta_lo,
                                             double delta_hi) {
  std::normal_distribution<double> G(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  TwoPhotonWavepacket p;
  p.kind = PacketKind::superposition;
  p.c.resize(n_emitters);
  for (int k = 0; k < n_emitters; ++k) p.c(k) = cplx(G(rng), G(rng));
  p.envelope.Omega0 = Omega_lo + (Omega_hi - Omega_lo) * U(rng);
  p.envelope.Delta = delta_lo + (delta_hi - delta_lo) * U(rng);
  return p;
}

}  // namespace wqed
