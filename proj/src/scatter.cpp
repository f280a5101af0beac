#include "wqed/scatter.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>

namespace wqed {

namespace {

using GL = boost::math::quadrature::gauss<double, 20>;

// Calls f(x, w) on composite 20-point Gauss-Legendre nodes of [a, b].
template <class F>
void gauss_panels(double a, double b, double panel, F&& f) {
  if (!(b > a)) return;
  const int np = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
  const double h = (b - a) / np;
  const auto& x = GL::abscissa();
  const auto& w = GL::weights();
  for (int p = 0; p < np; ++p) {
    const double c = a + (p + 0.5) * h, r = 0.5 * h;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == 0.0) {
        f(c, w[i] * r);
        continue;
      }
      f(c - r * x[i], w[i] * r);
      f(c + r * x[i], w[i] * r);
    }
  }
}

nlohmann::json cjson(const CVec& v) {
  auto j = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back({v(i).real(), v(i).imag()});
  return j;
}

}  // namespace

nlohmann::json DesignResult::to_json() const {
  nlohmann::json j;
  j["Omega0"] = Omega0;
  j["Delta"] = Delta;
  j["target"] = cjson(target);
  j["c_in"] = cjson(c_in);
  j["c_out"] = cjson(c_out);
  j["fidelity"] = fidelity;
  j["fidelity_finite_delta"] = fidelity_finite_delta;
  j["P"] = cjson(P);
  j["condition_number"] = condition_number;
  return j;
}

Scatterer::Scatterer(OverlapTable tab, const GreenOptions& green_opt, double pole_guard)
    : tab_(std::move(tab)), T_(green_table(tab_, green_opt), pole_guard) {
  const double tN = tab_.system.max_delay();
  panel_ = 0.25 / std::max(tab_.system.max_gamma(), 1e-12);
  if (tN > 0) panel_ = std::min(panel_, kPi / (4.0 * tN));
}

CMat Scatterer::U(double Omega) const {
  const int N = n_emitters(), Nb = n_bound();
  CMat out = CMat::Zero(Nb, N);
  if (T_.near_pole(Omega)) return out;
  CMat T = T_(Omega);
  Eigen::FullPivLU<CMat> lu(T.transpose());
  if (!lu.isInvertible()) throw NumericalError("trapping amplitude: T(Omega) singular");
  for (int a = 0; a < Nb; ++a) {
    CVec x = tab_.xi(Omega - tab_.row_omegas[a]);
    CVec w(N);
    for (int m = 0; m < N; ++m) w(m) = std::conj(tab_.eps(a, m)) * std::conj(x(m));
    // row vector w^T T^{-1}
    out.row(a) = -4.0 * kPi * lu.solve(w).transpose();
  }
  return out;
}

cplx Scatterer::gamma_amplitude(int alpha, double w, double nu1, double nu2) const {
  const double Omega = w + tab_.row_omegas.at(alpha);
  if (T_.near_pole(Omega)) (void)T_(Omega);  // throws the pole-guard error
  CMat u = U(Omega);
  CVec x1 = tab_.xi(nu1), x2 = tab_.xi(nu2);
  cplx s = 0.0;
  for (int n = 0; n < n_emitters(); ++n) s += u(alpha, n) * x1(n) * x2(n);
  return s;
}

CMat Scatterer::X(double Omega) const {
  const int N = n_emitters();
  CMat X = CMat::Zero(N, N);
  const double a = tab_.system.window_min, b = tab_.system.window_max;
  const double lo = std::max(a, Omega - b), hi = std::min(b, Omega - a);
  CVec g(N);
  gauss_panels(lo, hi, panel_, [&](double nu, double w) {
    CVec x1 = tab_.xi(nu), x2 = tab_.xi(Omega - nu);
    for (int n = 0; n < N; ++n) g(n) = x1(n) * x2(n);
    X.noalias() += w * g * g.adjoint();
  });
  return 0.5 * (X + X.adjoint().eval());
}

double Scatterer::pub_objective(int alpha, double Omega) const {
  CMat u = U(Omega);
  if (u.row(alpha).squaredNorm() == 0.0) return 0.0;
  CMat x = X(Omega);
  cplx v = (u.row(alpha) * x * u.row(alpha).adjoint())(0, 0);
  return 0.5 * v.real();
}

UpperBound Scatterer::upper_bound(int alpha, double half_width) const {
  const double g = std::max(tab_.system.max_gamma(), 1e-12);
  const double c = 2.0 * tab_.row_omegas.at(alpha);
  const double span = tab_.system.window_max - tab_.system.window_min;
  const double hw = half_width > 0 ? half_width * g : span;
  const double lo = c - hw, hi = c + hw;
  const double step = 0.1 * g / (1.0 + g * tab_.system.max_delay());
  const int n_scan = std::max(401, static_cast<int>(std::ceil(2.0 * hw / step)) + 1);
  std::vector<double> vals(n_scan);
  const double dx = (hi - lo) / (n_scan - 1);
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n_scan; ++i) vals[i] = pub_objective(alpha, lo + i * dx);
  auto f = [&](double x) { return pub_objective(alpha, x); };
  auto r = num::maximize_1d_from_scan(f, lo, hi, vals, 1e-6 * g);
  return {r.value, r.x};
}

template <class F>
void Scatterer::omega_quadrature(const Envelope& env, F&& f) const {
  const double a = env.Omega0 - 8.0 * env.Delta, b = env.Omega0 + 8.0 * env.Delta;
  gauss_panels(a, b, 2.0 * env.Delta, [&](double Om, double w) {
    double fe = env(Om);
    f(Om, w * fe * fe);
  });
}

TwoPhotonWavepacket Scatterer::superposition_packet(const CVec& c, double Omega0,
                                                    double Delta) const {
  if (!(Delta > 0)) throw ConfigError("wavepacket: Delta must be positive");
  if (c.size() != n_emitters()) throw ConfigError("wavepacket: coefficient vector has wrong length");
  TwoPhotonWavepacket p;
  p.kind = PacketKind::superposition;
  p.c = c;
  p.envelope = {Omega0, Delta};
  normalize(p);
  return p;
}

TwoPhotonWavepacket Scatterer::optimal_wavepacket(int alpha, double Delta,
                                                  std::optional<double> Omega0) const {
  if (!(Delta > 0)) throw ConfigError("optimal wavepacket: Delta must be positive");
  double O = Omega0 ? *Omega0 : upper_bound(alpha).Omega_star;
  TwoPhotonWavepacket p;
  p.kind = PacketKind::optimal;
  p.alpha = alpha;
  p.c = U(O).row(alpha).conjugate().transpose();
  p.envelope = {O, Delta};
  normalize(p);
  return p;
}

double Scatterer::norm2(const TwoPhotonWavepacket& p) const {
  if (!p.structured()) return p.grid.squaredNorm() * p.grid_step * p.grid_step;
  double s = 0.0;
  omega_quadrature(p.envelope, [&](double Om, double w) {
    s += w * (p.c.adjoint() * X(Om) * p.c)(0, 0).real();
  });
  return p.norm * p.norm * s;
}

void Scatterer::normalize(TwoPhotonWavepacket& p) const {
  double n2 = norm2(p);
  if (n2 <= 0) return;
  if (p.structured()) {
    p.norm /= std::sqrt(n2);
  } else {
    p.grid /= std::sqrt(n2);
  }
}

CMat Scatterer::bound_density(const TwoPhotonWavepacket& p) const {
  const int Nb = n_bound(), N = n_emitters();
  CMat rho = CMat::Zero(Nb, Nb);
  if (Nb == 0) return rho;
  if (p.structured()) {
    omega_quadrature(p.envelope, [&](double Om, double w) {
      CVec a = U(Om) * (X(Om) * p.c);
      rho.noalias() += w * a * a.adjoint();
    });
    return 0.5 * p.norm * p.norm * rho;
  }
  const int n = static_cast<int>(p.grid.rows());
  const double h = p.grid_step;
  std::vector<CVec> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = tab_.xi(p.grid_min + i * h);
  std::vector<CMat> parts(2 * n - 1);
#pragma omp parallel for schedule(dynamic, 8)
  for (int s = 0; s < 2 * n - 1; ++s) {
    const double Om = 2.0 * p.grid_min + s * h;
    CVec acc = CVec::Zero(N);
    for (int i = std::max(0, s - n + 1); i <= std::min(s, n - 1); ++i) {
      int j = s - i;
      if (p.grid(i, j) == 0.0) continue;
      for (int k = 0; k < N; ++k) acc(k) += xs[i](k) * xs[j](k) * p.grid(i, j) * h;
    }
    if (acc.squaredNorm() == 0.0) {
      parts[s] = CMat::Zero(Nb, Nb);
      continue;
    }
    CVec a = U(Om) * acc;
    parts[s] = a * a.adjoint() * h;
  }
  for (const auto& m : parts) rho += m;
  return 0.5 * rho;
}

std::vector<double> Scatterer::trapping_probabilities(const TwoPhotonWavepacket& p) const {
  CMat rho = bound_density(p);
  std::vector<double> P(rho.rows());
  for (int a = 0; a < rho.rows(); ++a) P[a] = rho(a, a).real();
  return P;
}

double Scatterer::trapping_probability(int alpha, const TwoPhotonWavepacket& p) const {
  return trapping_probabilities(p).at(alpha);
}

CVec Scatterer::output_amplitudes(const TwoPhotonWavepacket& p, double w) const {
  const int Nb = n_bound();
  CVec out(Nb);
  for (int a = 0; a < Nb; ++a) {
    double Om = w + tab_.row_omegas[a];
    CVec v = U(Om).row(a) * (X(Om) * p.c);
    out(a) = p.norm * p.envelope(Om) * v(0) / std::sqrt(2.0);
  }
  return out;
}

DesignMatrices Scatterer::design_matrices(double Omega) const {
  if (T_.near_pole(Omega)) (void)T_(Omega);
  DesignMatrices d;
  d.Omega = Omega;
  d.X = X(Omega);
  d.S = U(Omega) * d.X / std::sqrt(2.0);
  return d;
}

DesignResult Scatterer::design_input(const CVec& target, double Omega0, double Delta,
                                     double max_condition) const {
  if (target.size() != n_bound())
    throw ConfigError("design: target length must equal the number of bound states");
  if (target.norm() == 0.0) throw ConfigError("design: target vector is zero");
  DesignResult r;
  r.Omega0 = Omega0;
  r.Delta = Delta;
  r.target = target / target.norm();
  auto dm = design_matrices(Omega0);
  r.condition_number = num::condition_number(dm.S);
  if (!(r.condition_number <= max_condition))
    throw NumericalError("design: S(Omega0) is ill-conditioned (cond = " +
                         std::to_string(r.condition_number) + "); choose a different Omega0");
  if (dm.S.rows() == dm.S.cols())
    r.c_in = dm.S.fullPivLu().solve(r.target);
  else
    r.c_in = dm.S.completeOrthogonalDecomposition().solve(r.target);
  r.packet = superposition_packet(r.c_in, Omega0, Delta);
  r.c_out = dm.S * (r.packet.norm * r.c_in);
  auto fid = [&](const CVec& c) {
    return std::norm((r.target.adjoint() * c)(0, 0)) / c.squaredNorm();
  };
  r.fidelity = fid(r.c_out);
  CMat rho = bound_density(r.packet);
  r.P = rho.diagonal();
  double tr = rho.trace().real();
  r.fidelity_finite_delta = tr > 0 ? (r.target.adjoint() * rho * r.target)(0, 0).real() / tr : 0.0;
  return r;
}

}  // namespace wqed
