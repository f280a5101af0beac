#include "wqed/green.hpp"

#include <algorithm>
#include <cmath>

namespace wqed {

namespace {

// (e^{z} - 1) / z and (e^{z} - 1 - z) / z^2
cplx phi1(cplx z) {
  if (std::abs(z) < 1e-4) return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
  return (std::exp(z) - 1.0) / z;
}
cplx phi2(cplx z) {
  if (std::abs(z) < 1e-4) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
  return (std::exp(z) - 1.0 - z) / (z * z);
}

struct DelayTerm {
  int n;        // source emitter of the delayed value
  double d;     // delay
  long j;       // floor(d / dt)
  double frac;  // d / dt - j
  cplx coef;    // coupling times exp(i omega_ref d)
};

double auto_dt(const SystemSpec& sys) {
  double g = std::max(sys.max_gamma(), 1e-12);
  double dt = 0.005 / g;
  for (int m = 0; m < sys.size(); ++m)
    for (int n = 0; n < sys.size(); ++n) {
      double tm = sys.emitters[m].delay, tn = sys.emitters[n].delay;
      dt = std::min(dt, (tm + tn) / 8.0);
      if (m != n) dt = std::min(dt, std::abs(tm - tn) / 8.0);
    }
  return dt;
}

std::vector<BoundTerm> bound_terms(const OverlapTable& tab, int m, int n) {
  std::vector<BoundTerm> out;
  for (int a = 0; a < tab.n_bound(); ++a) {
    out.push_back({tab.eps(a, m) * std::conj(tab.eps(a, n)), 0.0});
  }
  return out;
}

// Neville extrapolation of (x_i, y_i) to x = 0
cplx neville_at_zero(const std::vector<double>& x, std::vector<cplx> y) {
  const int n = static_cast<int>(x.size());
  for (int k = 1; k < n; ++k)
    for (int i = 0; i < n - k; ++i)
      y[i] = (x[i + k] * y[i] - x[i] * y[i + 1]) / (x[i + k] - x[i]);
  return y[0];
}

}  // namespace

cplx GreenFunction::bound_at(double t) const {
  cplx s = 0.0;
  for (const auto& b : bound_part) s += b.coeff * std::exp(-kI * b.omega * t);
  return s;
}

cplx GreenFunction::continuum_at(double t) const {
  if (continuum.empty() || t < 0) return 0.0;
  double p = t / dt;
  auto k = static_cast<std::size_t>(p);
  if (k + 1 >= continuum.size()) return k + 1 == continuum.size() && p == k ? continuum.back() * std::exp(-kI * omega_ref * t) : 0.0;
  double u = p - k;
  return ((1 - u) * continuum[k] + u * continuum[k + 1]) * std::exp(-kI * omega_ref * t);
}

double GreenTable::tail_abs() const {
  double t = 0.0;
  for (const auto& x : g) t = std::max(t, x.tail_abs);
  return t;
}

std::vector<cplx> delay_response(const SystemSpec& sys, int source, double dt, long n_steps,
                                 double omega_ref) {
  if (sys.kind != CouplingKind::feedback)
    throw NumericalError("delay_response: feedback systems only");
  const int N = sys.size();
  std::vector<std::vector<DelayTerm>> terms(N);
  for (int m = 0; m < N; ++m) {
    for (int n = 0; n < N; ++n) {
      const auto& em = sys.emitters[m];
      const auto& en = sys.emitters[n];
      double g = std::sqrt(em.gamma * en.gamma);
      auto add = [&](double d, double c) {
        double r = d / dt;
        long j = static_cast<long>(std::floor(r + 1e-9));
        double frac = std::max(0.0, r - j);
        terms[m].push_back({n, d, j, frac, c * std::exp(kI * omega_ref * d)});
      };
      if (n != m) add(std::abs(em.delay - en.delay), -g);
      add(em.delay + en.delay, g);
    }
  }
  std::vector<cplx> a(N), ea(N), p1(N), p2(N);
  for (int m = 0; m < N; ++m) {
    a[m] = -kI * (sys.emitters[m].omega - omega_ref) - sys.emitters[m].gamma;
    ea[m] = std::exp(a[m] * dt);
    p1[m] = phi1(a[m] * dt) * dt;
    p2[m] = phi2(a[m] * dt) * dt;
  }
  std::vector<cplx> c(static_cast<std::size_t>(n_steps + 1) * N, 0.0);
  c[source] = 1.0;
  // delayed value c_n(k - d/dt) with the left limit 0 for negative arguments;
  // right_end selects the left limit at an argument of exactly zero
  auto delayed = [&](const DelayTerm& T, long k, bool right_end) -> cplx {
    long i0 = k - T.j;  // argument = i0 - frac
    if (T.frac == 0.0) {
      if (i0 < 0 || (i0 == 0 && right_end)) return 0.0;
      return c[i0 * N + T.n];
    }
    if (i0 - 1 < 0) return 0.0;
    return (1.0 - T.frac) * c[i0 * N + T.n] + T.frac * c[(i0 - 1) * N + T.n];
  };
  for (long k = 0; k < n_steps; ++k) {
    const double tk = k * dt;
    for (int m = 0; m < N; ++m) {
      cplx g0 = 0.0, g1 = 0.0, jump = 0.0;
      for (const auto& T : terms[m]) {
        double off = T.d - tk;  // delayed argument crosses zero inside this step
        if (off > 0 && off < dt && T.frac != 0.0) {
          jump += T.coef * c[T.n] * phi1(a[m] * (dt - off)) * (dt - off);
          continue;
        }
        g0 += T.coef * delayed(T, k, false);
        g1 += T.coef * delayed(T, k + 1, true);
      }
      c[(k + 1) * N + m] = ea[m] * c[k * N + m] + p1[m] * g0 + p2[m] * (g1 - g0) + jump;
    }
  }
  return c;
}

namespace {

GreenTable table_from_delay(const OverlapTable& tab, double dt, long n_steps, double omega_ref,
                            long keep) {
  const SystemSpec& sys = tab.system;
  const int N = sys.size();
  const auto& w_rows = tab.row_omegas;
  GreenTable out;
  out.N = N;
  out.gamma = std::max(sys.max_gamma(), 1e-12);
  out.route = GreenRoute::delay;
  out.g.resize(N * N);
  for (int src = 0; src < N; ++src) {
    auto c = delay_response(sys, src, dt, n_steps, omega_ref);
    for (int m = 0; m < N; ++m) {
      GreenFunction& G = out.g[m * N + src];
      G.m = m;
      G.n = src;
      G.dt = dt;
      G.omega_ref = omega_ref;
      G.bound_part = bound_terms(tab, m, src);
      for (int a = 0; a < tab.n_bound(); ++a) G.bound_part[a].omega = w_rows[a];
      G.continuum.resize(keep + 1);
      for (long k = 0; k <= keep; ++k) {
        double t = k * dt;
        cplx gb = 0.0;
        for (const auto& b : G.bound_part) gb += b.coeff * std::exp(-kI * (b.omega - omega_ref) * t);
        G.continuum[k] = c[k * N + m] - gb;
      }
    }
  }
  return out;
}

double stretch_max(const GreenTable& t, long from, long to) {
  double mx = 0.0;
  for (const auto& G : t.g)
    for (long k = from; k <= to && k < static_cast<long>(G.continuum.size()); ++k)
      mx = std::max(mx, std::abs(G.continuum[k]));
  return mx;
}

}  // namespace

GreenTable green_table(const OverlapTable& tab, const GreenOptions& opt) {
  const SystemSpec& sys = tab.system;
  bool spectral = opt.route == GreenRoute::spectral ||
                  (opt.route == GreenRoute::automatic && sys.kind != CouplingKind::feedback);
  const double omega_ref = sys.mean_omega();
  if (spectral) return green_table_spectral(tab, omega_ref);

  const double g = std::max(sys.max_gamma(), 1e-12);
  const double dt = opt.dt > 0 ? opt.dt : auto_dt(sys);
  const long n_cap = static_cast<long>(std::ceil(opt.t_cap / g / dt));
  const long n_min = std::min(n_cap, static_cast<long>(std::ceil(opt.t_min / g / dt)));
  auto full = table_from_delay(tab, dt, n_cap, omega_ref, n_cap);
  // shortest T_max with |G_c| below tail_tol over the last stretch
  const long stretch = static_cast<long>(std::ceil(std::max(4.0 * sys.max_delay(), 5.0 / g) / dt));
  long keep = n_cap;
  for (long end = n_min; end <= n_cap; end += stretch) {
    if (stretch_max(full, std::max(0L, end - stretch), end) < opt.tail_tol) {
      keep = end;
      break;
    }
  }
  for (auto& G : full.g) {
    G.continuum.resize(keep + 1);
    double mx = 0.0;
    for (long k = std::max(0L, keep - stretch); k <= keep; ++k)
      mx = std::max(mx, std::abs(G.continuum[k]));
    G.tail_abs = mx;
  }
  return full;
}

GreenFunction green_function(const OverlapTable& tab, int m, int n, const GreenOptions& opt) {
  auto t = green_table(tab, opt);
  return t.at(m, n);
}

GreenTable green_table_spectral(const OverlapTable& tab, double omega_ref) {
  const int N = tab.n_emitters();
  const int n = static_cast<int>(tab.xi_samples.size());
  const int n_pad = 4 * n;
  const double dw = tab.grid_step;
  const double dt = 2.0 * kPi / (n_pad * dw);
  const int taper = std::max(1, n / 20);
  std::vector<double> w(n, 1.0);
  for (int j = 0; j < taper; ++j) {
    double s = 0.5 * (1.0 - std::cos(kPi * j / taper));
    w[j] = s;
    w[n - 1 - j] = s;
  }
  w[0] *= 0.5;
  w[n - 1] *= 0.5;
  const auto& w_rows = tab.row_omegas;
  GreenTable out;
  out.N = N;
  out.gamma = std::max(tab.system.max_gamma(), 1e-12);
  out.route = GreenRoute::spectral;
  out.g.resize(N * N);
  const long keep = n_pad / 2;
  for (int m = 0; m < N; ++m) {
    for (int q = 0; q < N; ++q) {
      std::vector<cplx> buf(n_pad, 0.0);
      for (int j = 0; j < n; ++j)
        buf[j] = w[j] * tab.xi_samples[j](m) * std::conj(tab.xi_samples[j](q)) * dw;
      auto F = num::dft(buf, -1);
      GreenFunction& G = out.g[m * N + q];
      G.m = m;
      G.n = q;
      G.dt = dt;
      G.omega_ref = omega_ref;
      G.bound_part = bound_terms(tab, m, q);
      for (int a = 0; a < tab.n_bound(); ++a) G.bound_part[a].omega = w_rows[a];
      G.continuum.resize(keep + 1);
      for (long k = 0; k <= keep; ++k)
        G.continuum[k] = F[k] * std::exp(-kI * (tab.grid_min - omega_ref) * (k * dt));
      double mx = 0.0;
      for (long k = keep - keep / 10; k <= keep; ++k) mx = std::max(mx, std::abs(G.continuum[k]));
      G.tail_abs = mx;
    }
  }
  return out;
}

TMatrixEvaluator::TMatrixEvaluator(GreenTable table, double pole_guard)
    : table_(std::move(table)), pole_guard_(pole_guard) {
  const int N = table_.N;
  const auto& g00 = table_.at(0, 0);
  omega_ref_ = g00.omega_ref;
  dt_ = g00.dt;
  F_.resize(N * N);
  tail_rate_.resize(N * N);
  const int nb = static_cast<int>(g00.bound_part.size());
  n_pairs_ = nb * nb;
  bb_coeff_.assign(static_cast<std::size_t>(N) * N * n_pairs_, 0.0);
  bb_omega_.assign(n_pairs_, 0.0);
  for (int idx = 0; idx < N * N; ++idx) {
    const auto& G = table_.g[idx];
    const std::size_t n = G.continuum.size();
    auto& F = F_[idx];
    F.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      double t = k * dt_;
      cplx gb = 0.0;
      for (const auto& b : G.bound_part) gb += b.coeff * std::exp(-kI * (b.omega - omega_ref_) * t);
      F[k] = 2.0 * gb * G.continuum[k] + G.continuum[k] * G.continuum[k];
    }
    for (int a = 0; a < nb; ++a)
      for (int b = 0; b < nb; ++b) {
        bb_coeff_[idx * n_pairs_ + a * nb + b] = G.bound_part[a].coeff * G.bound_part[b].coeff;
        bb_omega_[a * nb + b] = G.bound_part[a].omega + G.bound_part[b].omega;
      }
  }
}

bool TMatrixEvaluator::near_pole(double Omega) const {
  const double g = table_.gamma;
  for (double w : bb_omega_)
    if (std::abs(Omega - w) < pole_guard_ * g) return true;
  return false;
}

CMat TMatrixEvaluator::operator()(double Omega) const {
  if (near_pole(Omega))
    throw NumericalError("t_matrix: Omega within the pole guard of a bound-bound resonance");
  const int N = table_.N;
  const double w = Omega - 2.0 * omega_ref_;
  CMat T(N, N);
  for (int idx = 0; idx < N * N; ++idx) {
    const auto& F = F_[idx];
    cplx v = num::filon_linear(F.data(), F.size(), dt_, w);
    // exponential tail fitted over the last unit of time
    const std::size_t n = F.size();
    const std::size_t L = std::min<std::size_t>(n - 1, static_cast<std::size_t>(1.0 / dt_));
    if (L > 0 && std::abs(F[n - 1 - L]) > 0 && std::abs(F[n - 1]) > 0) {
      cplx q = std::log(F[n - 1] / F[n - 1 - L]) / (L * dt_);
      if (q.real() < 0) {
        double T_end = (n - 1) * dt_;
        v += -F[n - 1] * std::exp(kI * w * T_end) / (q + kI * w);
      }
    }
    for (int p = 0; p < n_pairs_; ++p) v += kI * bb_coeff_[idx * n_pairs_ + p] / (Omega - bb_omega_[p]);
    T(idx / N, idx % N) = v;
  }
  return T;
}

std::vector<CMat> t_matrix_eta_oracle(const OverlapTable& tab, const std::vector<double>& Omegas,
                                      double eta0, int n_eta) {
  const SystemSpec& sys = tab.system;
  if (sys.kind != CouplingKind::feedback)
    throw NumericalError("t_matrix_eta_oracle: feedback systems only");
  const int N = sys.size();
  const double dt = auto_dt(sys);
  const double omega_ref = sys.mean_omega();
  long n_steps = static_cast<long>(std::ceil(32.0 / eta0 / dt));
  if (n_steps % 2) ++n_steps;
  const int nO = static_cast<int>(Omegas.size());
  std::vector<double> etas(n_eta);
  for (int e = 0; e < n_eta; ++e) etas[e] = eta0 * (e + 1);
  // acc[(o * n_eta + e) * N * N + m * N + n]
  std::vector<cplx> acc(static_cast<std::size_t>(nO) * n_eta * N * N, 0.0);
  std::vector<cplx> z(nO * n_eta), ph(nO * n_eta);
  for (int src = 0; src < N; ++src) {
    auto c = delay_response(sys, src, dt, n_steps, omega_ref);
    for (int o = 0; o < nO; ++o)
      for (int e = 0; e < n_eta; ++e) {
        cplx s(-etas[e], Omegas[o] - 2.0 * omega_ref);
        z[o * n_eta + e] = std::exp(s * dt);
        ph[o * n_eta + e] = 1.0;
      }
    for (long k = 0; k <= n_steps; ++k) {
      // composite Simpson weights
      double wk = (k == 0 || k == n_steps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      wk *= dt / 3.0;
      for (int i = 0; i < nO * n_eta; ++i) {
        if (k > 0 && (k & 1023) == 0) {
          int o = i / n_eta, e = i % n_eta;
          ph[i] = std::exp(cplx(-etas[e], Omegas[o] - 2.0 * omega_ref) * (k * dt));
        } else if (k > 0) {
          ph[i] *= z[i];
        }
        cplx f = wk * ph[i];
        for (int m = 0; m < N; ++m) {
          cplx gm = c[k * N + m];
          acc[static_cast<std::size_t>(i) * N * N + m * N + src] += f * gm * gm;
        }
      }
    }
  }
  std::vector<CMat> out(nO, CMat::Zero(N, N));
  for (int o = 0; o < nO; ++o)
    for (int m = 0; m < N; ++m)
      for (int n = 0; n < N; ++n) {
        std::vector<cplx> y(n_eta);
        for (int e = 0; e < n_eta; ++e)
          y[e] = acc[(static_cast<std::size_t>(o) * n_eta + e) * N * N + m * N + n];
        out[o](m, n) = neville_at_zero(etas, y);
      }
  return out;
}

}  // namespace wqed
