#include "wqed/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

namespace wqed {

namespace {

const double kSqrt2Pi = std::sqrt(2.0 * kPi);

// half-width of the interval around a bound-state frequency where xi is
// replaced by its two-sided limit
constexpr double kLimitHalfWidth = 1e-3;

std::vector<double> sorted_breaks(const SystemSpec& sys) {
  std::vector<double> br;
  for (int n = sys.size() - 1; n >= 0; --n) br.push_back(-sys.emitters[n].delay);
  for (int n = 0; n < sys.size(); ++n) br.push_back(sys.emitters[n].delay);
  return br;
}

// Segment coefficients of exp(i w x) * f(x) for a wave kicked by emitter
// amplitudes a_n: +i sqrt(g) a e^{-iwt} at x = -t_n, -i sqrt(g) a e^{iwt} at +t_n.
std::vector<cplx> kicked_coeffs(const SystemSpec& sys, double w, const CVec& a, cplx left) {
  const int N = sys.size();
  std::vector<cplx> c;
  c.reserve(2 * N + 1);
  cplx cur = left;
  c.push_back(cur);
  for (int n = N - 1; n >= 0; --n) {
    const auto& e = sys.emitters[n];
    cur += kI * std::sqrt(e.gamma) * a(n) * std::exp(-kI * w * e.delay);
    c.push_back(cur);
  }
  for (int n = 0; n < N; ++n) {
    const auto& e = sys.emitters[n];
    cur -= kI * std::sqrt(e.gamma) * a(n) * std::exp(kI * w * e.delay);
    c.push_back(cur);
  }
  return c;
}

CVec raw_b(const SystemSpec& sys, double w) {
  auto mp = build_M(sys, w);
  const int N = sys.size();
  CVec b(N);
  if (N == 1) {
    if (mp.M(0, 0) == 0.0) throw NumericalError("scattering solve: M(w) singular");
    b(0) = mp.f(0) / mp.M(0, 0);
    return b;
  }
  if (N == 2) {
    cplx det = mp.M(0, 0) * mp.M(1, 1) - mp.M(0, 1) * mp.M(1, 0);
    if (det == 0.0) throw NumericalError("scattering solve: M(w) singular");
    b(0) = (mp.M(1, 1) * mp.f(0) - mp.M(0, 1) * mp.f(1)) / det;
    b(1) = (mp.M(0, 0) * mp.f(1) - mp.M(1, 0) * mp.f(0)) / det;
    return b;
  }
  Eigen::PartialPivLU<CMat> lu(mp.M);
  return lu.solve(mp.f);
}

// Symmetric 6-node Lagrange estimate of g at w from samples at s +/- k d.
template <class G>
CVec two_sided_limit(G&& g, double s, double w, double d) {
  const double nodes[6] = {-3, -2, -1, 1, 2, 3};
  CVec acc;
  for (int i = 0; i < 6; ++i) {
    double xi = s + nodes[i] * d;
    double L = 1.0;
    for (int j = 0; j < 6; ++j)
      if (j != i) L *= (w - (s + nodes[j] * d)) / (xi - (s + nodes[j] * d));
    CVec val = g(xi);
    if (i == 0) acc = L * val;
    else acc += L * val;
  }
  return acc;
}

cplx det_of(const CMat& M) {
  if (M.rows() == 1) return M(0, 0);
  if (M.rows() == 2) return M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  return M.fullPivLu().determinant();
}

// Gram-Schmidt of the columns of V under the metric K (inner product y^H K x).
CMat gram_schmidt(const CMat& V, const CMat& K) {
  CMat Q = V;
  for (int a = 0; a < Q.cols(); ++a) {
    for (int b = 0; b < a; ++b) {
      cplx proj = (Q.col(b).adjoint() * K * Q.col(a))(0, 0);
      Q.col(a) -= proj * Q.col(b);
    }
    double nrm = std::sqrt(std::real((Q.col(a).adjoint() * K * Q.col(a))(0, 0)));
    Q.col(a) /= nrm;
  }
  return Q;
}

// Waveguide norm (1/2pi) int |sum v_n V_n^*(k)|^2 / (k - w)^2 dk for custom couplings.
double custom_waveguide_norm(const SystemSpec& sys, double wb, const CVec& v) {
  auto integrand = [&](double k) -> cplx {
    cplx s = 0.0;
    for (int n = 0; n < sys.size(); ++n) s += v(n) * std::conj(coupling_value(sys, n + 1, k));
    double d = k - wb;
    return std::norm(s) / (2.0 * kPi * d * d);
  };
  std::vector<double> br{sys.window_min, sys.window_max};
  if (wb > sys.window_min && wb < sys.window_max) br.insert(br.begin() + 1, wb);
  return num::integrate(integrand, br, 1e-10).value.real();
}

}  // namespace

cplx PiecewiseWave::operator()(double x) const {
  const std::size_t K = breaks.size();
  std::size_t k = std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin();
  cplx c;
  if (k > 0 && x == breaks[k - 1]) c = 0.5 * (coeffs[k - 1] + coeffs[k]);
  else c = coeffs[std::min(k, K)];
  return prefactor * std::exp(-kI * omega * x) * c;
}

double PiecewiseWave::inner_norm2() const {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
    s += std::norm(coeffs[k + 1]) * (breaks[k + 1] - breaks[k]);
  return s * prefactor * prefactor;
}

cplx segment_phase_integral(double k, double a, double b) {
  if (std::abs(k * (b - a)) < 1e-8) return (b - a) * std::exp(-kI * k * 0.5 * (a + b));
  return (std::exp(-kI * k * a) - std::exp(-kI * k * b)) / (kI * k);
}

cplx inner_finite(const PiecewiseWave& f, const PiecewiseWave& g) {
  cplx s = 0.0;
  const double k = f.omega - g.omega;
  for (std::size_t j = 0; j + 1 < f.breaks.size(); ++j)
    s += f.coeffs[j + 1] * std::conj(g.coeffs[j + 1]) *
         segment_phase_integral(k, f.breaks[j], f.breaks[j + 1]);
  return s * f.prefactor * g.prefactor;
}

MatrixPair build_M(const SystemSpec& sys, double w) {
  const int N = sys.size();
  MatrixPair out{CMat::Zero(N, N), CVec::Zero(N)};
  if (sys.kind == CouplingKind::feedback) {
    for (int m = 0; m < N; ++m) {
      const auto& em = sys.emitters[m];
      for (int n = 0; n < N; ++n) {
        const auto& en = sys.emitters[n];
        double tmin = std::min(em.delay, en.delay), tmax = std::max(em.delay, en.delay);
        out.M(m, n) = 2.0 * std::sqrt(em.gamma * en.gamma) * std::sin(w * tmin) *
                      std::exp(-kI * w * tmax);
      }
      out.M(m, m) += w - em.omega;
      out.f(m) = 2.0 * kI * std::sqrt(em.gamma) * std::sin(w * em.delay);
    }
    return out;
  }
  // custom: M = (w - w_n) delta - conj(Sigma), Sigma_mn = PV/(2pi) - (i/2) V_m V_n^*
  const double a = sys.window_min, b = sys.window_max;
  std::vector<cplx> Vw(N);
  for (int n = 0; n < N; ++n) Vw[n] = coupling_value(sys, n + 1, w);
  for (int m = 0; m < N; ++m) {
    for (int n = 0; n < N; ++n) {
      auto g = [&](double nu) {
        return coupling_value(sys, m + 1, nu) * std::conj(coupling_value(sys, n + 1, nu));
      };
      cplx gw = Vw[m] * std::conj(Vw[n]);
      auto integrand = [&](double nu) -> cplx {
        double d = w - nu;
        if (d == 0.0) return 0.0;
        return (g(nu) - gw) / d;
      };
      std::vector<double> br{a, b};
      if (w > a && w < b) br.insert(br.begin() + 1, w);
      cplx pv = num::integrate(integrand, br, 1e-11).value;
      if (gw != 0.0) pv += gw * std::log(std::abs((w - a) / (w - b)));
      cplx sigma = pv / (2.0 * kPi) - 0.5 * kI * gw;
      out.M(m, n) = -std::conj(sigma);
    }
    out.M(m, m) += w - sys.emitters[m].omega;
    out.f(m) = -std::conj(Vw[m]);
  }
  return out;
}

ScatteringState solve_scattering_state(const SystemSpec& sys, double w) {
  ScatteringState s;
  s.omega = w;
  auto mp = build_M(sys, w);
  s.b = num::solve_linear(mp.M, mp.f).x;
  s.beta = s.b / kSqrt2Pi;
  if (sys.kind == CouplingKind::feedback) {
    s.segment_coeffs = kicked_coeffs(sys, w, s.b, 1.0);
    s.tau = s.segment_coeffs.back();
    s.profile.omega = w;
    s.profile.prefactor = 1.0 / kSqrt2Pi;
    s.profile.breaks = sorted_breaks(sys);
    s.profile.coeffs = s.segment_coeffs;
  } else {
    cplx acc = 1.0;
    for (int n = 0; n < sys.size(); ++n) acc -= kI * s.b(n) * coupling_value(sys, n + 1, w);
    s.tau = acc;
  }
  return s;
}

CVec xi_exact(const SystemSpec& sys, double w, const std::vector<double>& singular) {
  for (double s : singular) {
    if (std::abs(w - s) < kLimitHalfWidth) {
      auto g = [&](double x) -> CVec { return raw_b(sys, x); };
      return two_sided_limit(g, s, w, kLimitHalfWidth).conjugate() / kSqrt2Pi;
    }
  }
  return raw_b(sys, w).conjugate() / kSqrt2Pi;
}

BoundState make_bound_state(const SystemSpec& sys, double omega_b, const CVec& v_in) {
  BoundState s;
  s.omega_b = omega_b;
  CVec v = v_in;
  double wave_norm = 0.0;
  if (sys.kind == CouplingKind::feedback) {
    auto c = kicked_coeffs(sys, omega_b, v, 0.0);
    s.profile.omega = omega_b;
    s.profile.breaks = sorted_breaks(sys);
    s.profile.coeffs = c;
    wave_norm = s.profile.inner_norm2();
  } else {
    wave_norm = custom_waveguide_norm(sys, omega_b, v);
  }
  double total = v.squaredNorm() + wave_norm;
  double scale = 1.0 / std::sqrt(total);
  s.v = v * scale;
  for (auto& c : s.profile.coeffs) c *= scale;
  if (!s.profile.coeffs.empty())
    s.segment_coeffs.assign(s.profile.coeffs.begin() + 1, s.profile.coeffs.end() - 1);
  double wn = sys.kind == CouplingKind::feedback ? s.profile.inner_norm2()
                                                  : wave_norm * scale * scale;
  s.norm_check = std::abs(s.v.squaredNorm() + wn - 1.0);
  cplx cons = 0.0;
  for (int n = 0; n < sys.size(); ++n) cons += s.v(n) * coupling_value(sys, n + 1, omega_b);
  s.consistency = std::abs(cons);
  if (sys.kind == CouplingKind::feedback) {
    // outermost coefficient must vanish for a normalizable state
    s.consistency = std::max(s.consistency, std::abs(s.profile.coeffs.back()));
    s.profile.coeffs.back() = 0.0;
  }
  return s;
}

cplx bound_state_profile(const BoundState& s, double x) {
  if (s.profile.breaks.empty()) throw NumericalError("bound_state_profile: no position-space form");
  if (x < s.profile.breaks.front() || x > s.profile.breaks.back()) return 0.0;
  return s.profile(x);
}

cplx inner(const BoundState& a, const BoundState& b) {
  cplx s = (b.v.adjoint() * a.v)(0, 0);
  if (!a.profile.breaks.empty()) s += inner_finite(a.profile, b.profile);
  return s;
}

cplx inner(const BoundState& a, const ScatteringState& sc) {
  cplx s = (sc.beta.adjoint() * a.v)(0, 0);
  if (!a.profile.breaks.empty()) s += inner_finite(a.profile, sc.profile);
  return s;
}

cplx scattering_offdiag(const ScatteringState& a, const ScatteringState& b) {
  cplx s = (b.beta.adjoint() * a.beta)(0, 0);
  const double d = a.omega - b.omega;
  const auto& br = a.profile.breaks;
  if (br.empty()) throw NumericalError("scattering_offdiag: feedback systems only");
  s += inner_finite(a.profile, b.profile);
  const double tN = br.back();
  cplx outer = kI * std::exp(kI * d * tN) / d -
               kI * a.tau * std::conj(b.tau) * std::exp(-kI * d * tN) / d;
  s += outer / (2.0 * kPi);
  return s;
}

BoundSearch find_bound_states(const SystemSpec& sys, const BoundSearchOptions& opt) {
  require_valid(sys);
  BoundSearch out;
  const int N = sys.size();
  const double gmax = std::max(sys.max_gamma(), 1e-300);

  if (degenerate_feedback(sys, opt.degeneracy_tol)) {
    out.degenerate_construction = true;
    const double w0 = sys.emitters[0].omega;
    // Gram matrix of the unit vectors under the full inner product
    CMat L = CMat::Zero(2 * N - 1, N);
    std::vector<double> len(2 * N - 1);
    auto br = sorted_breaks(sys);
    for (int k = 0; k < 2 * N - 1; ++k) len[k] = br[k + 1] - br[k];
    for (int a = 0; a < N; ++a) {
      auto c = kicked_coeffs(sys, w0, CVec::Unit(N, a), 0.0);
      for (int k = 0; k < 2 * N - 1; ++k) L(k, a) = c[k + 1];
    }
    CMat D = CMat::Zero(2 * N - 1, 2 * N - 1);
    for (int k = 0; k < 2 * N - 1; ++k) D(k, k) = len[k];
    CMat K = CMat::Identity(N, N) + L.adjoint() * D * L;
    CMat Q = gram_schmidt(CMat::Identity(N, N), K);
    for (int a = 0; a < N; ++a) out.states.push_back(make_bound_state(sys, w0, Q.col(a)));
    return out;
  }

  // scan |det M| for local minima
  const double tN = sys.max_delay();
  double step = opt.scan_step > 0 ? opt.scan_step
                                   : std::min(0.01 * gmax, kPi / (40.0 * std::max(tN, 1e-12)));
  const int n = std::max(3, static_cast<int>((sys.window_max - sys.window_min) / step) + 1);
  step = (sys.window_max - sys.window_min) / (n - 1);
  std::vector<double> dabs(n);
  for (int i = 0; i < n; ++i)
    dabs[i] = std::abs(det_of(build_M(sys, sys.window_min + i * step).M));
  auto absdet = [&](double w) { return std::abs(det_of(build_M(sys, w).M)); };

  std::vector<double> found;
  for (int i = 1; i + 1 < n; ++i) {
    if (!(dabs[i] <= dabs[i - 1] && dabs[i] < dabs[i + 1])) continue;
    double a = sys.window_min + (i - 1) * step, b = sys.window_min + (i + 1) * step;
    boost::uintmax_t iters = 200;
    auto [w, dmin] = boost::math::tools::brent_find_minima(absdet, a, b, 40, iters);
    // polish a genuine simple zero: rotate det so that its real part changes sign
    const double h = std::max(1e-7, 1e-3 * step);
    cplx dprime = (det_of(build_M(sys, w + h).M) - det_of(build_M(sys, w - h).M)) / (2.0 * h);
    if (std::abs(dprime) > 0) {
      cplx rot = std::conj(dprime) / std::abs(dprime);
      auto re = [&](double x) { return std::real(rot * det_of(build_M(sys, x).M)); };
      double lo = w - 10 * h, hi = w + 10 * h;
      if ((re(lo) > 0) != (re(hi) > 0)) {
        double r = num::find_root_bracketed(re, lo, hi, 1e-12 * std::max(1.0, gmax));
        if (absdet(r) < dmin) {
          w = r;
          dmin = absdet(r);
        }
      }
    }
    // avoid duplicates from adjacent minima
    bool dup = false;
    for (double f : found) dup |= std::abs(f - w) < 1e-9;
    if (dup) continue;

    auto mp = build_M(sys, w);
    Eigen::JacobiSVD<CMat> svd(mp.M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double dscale = std::max(1.0, std::abs(dprime));
    const bool det_zero = dmin <= opt.det_tol * dscale;
    // null vectors: singular values negligible against the matrix scale
    double mscale = std::max({1.0, sv(0), std::abs(w)});
    std::vector<CVec> nulls;
    for (int k = 0; k < N; ++k)
      if (sv(k) <= 1e-7 * mscale) nulls.push_back(svd.matrixV().col(k));
    if (nulls.empty()) nulls.push_back(svd.matrixV().col(N - 1));

    std::vector<CVec> accepted;
    for (const auto& v : nulls) {
      cplx cons = 0.0;
      for (int m = 0; m < N; ++m) cons += v(m) * coupling_value(sys, m + 1, w);
      double resid = std::abs(cons) / std::sqrt(gmax);
      if (resid > opt.consistency_tol) {
        out.rejected.push_back({w, dmin, resid, "not normalizable (consistency residual)"});
      } else if (!det_zero) {
        out.rejected.push_back({w, dmin, resid, "det M not zero"});
      } else {
        accepted.push_back(v);
      }
    }
    if (accepted.empty()) continue;
    found.push_back(w);
    // orthonormalize within the degenerate set
    CMat V(N, accepted.size());
    for (std::size_t k = 0; k < accepted.size(); ++k) V.col(k) = accepted[k];
    std::vector<BoundState> raw;
    for (std::size_t k = 0; k < accepted.size(); ++k) raw.push_back(make_bound_state(sys, w, V.col(k)));
    CMat K(raw.size(), raw.size());
    for (std::size_t p = 0; p < raw.size(); ++p)
      for (std::size_t q = 0; q < raw.size(); ++q) K(q, p) = inner(raw[p], raw[q]);
    CMat Vn(N, raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) Vn.col(k) = raw[k].v;
    CMat Q = gram_schmidt(CMat::Identity(raw.size(), raw.size()), K);
    CMat Vo = Vn * Q;
    for (int k = 0; k < Vo.cols(); ++k) out.states.push_back(make_bound_state(sys, w, Vo.col(k)));
  }
  return out;
}

CVec OverlapTable::xi(double w) const {
  if (exact) return xi_exact(system, w, bound_omegas);
  const int N = system.size();
  const int n = static_cast<int>(xi_samples.size());
  double pos = (w - grid_min) / grid_step;
  if (pos < 0 || pos > n - 1) return CVec::Zero(N);
  // cubic Lagrange on the four nearest samples
  int i1 = std::clamp(static_cast<int>(std::floor(pos)), 1, n - 3);
  double u = pos - i1;
  double c0 = -u * (u - 1) * (u - 2) / 6.0, c1 = (u + 1) * (u - 1) * (u - 2) / 2.0;
  double c2 = -(u + 1) * u * (u - 2) / 2.0, c3 = (u + 1) * u * (u - 1) / 6.0;
  return c0 * xi_samples[i1 - 1] + c1 * xi_samples[i1] + c2 * xi_samples[i1 + 1] +
         c3 * xi_samples[i1 + 2];
}

namespace {

OverlapTable table_header(const SystemSpec& sys, const std::vector<BoundState>& states,
                          int n_grid) {
  OverlapTable t;
  t.system = sys;
  t.exact = sys.kind == CouplingKind::feedback;
  const int N = sys.size();
  t.eps = CMat::Zero(states.size(), N);
  for (std::size_t a = 0; a < states.size(); ++a) {
    t.eps.row(a) = states[a].v.conjugate().transpose();
    t.row_omegas.push_back(states[a].omega_b);
    bool seen = false;
    for (double w : t.bound_omegas) seen |= std::abs(w - states[a].omega_b) < 1e-12;
    if (!seen) t.bound_omegas.push_back(states[a].omega_b);
  }
  n_grid = std::max(n_grid, 4001);
  t.grid_min = sys.window_min;
  t.grid_step = (sys.window_max - sys.window_min) / (n_grid - 1);
  t.xi_samples.resize(n_grid);
  return t;
}

}  // namespace

OverlapTable overlaps(const SystemSpec& sys, const std::vector<BoundState>& states, int n_grid) {
  auto t = table_header(sys, states, n_grid);
  const int n = static_cast<int>(t.xi_samples.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (int i = 0; i < n; ++i) t.xi_samples[i] = xi_exact(sys, t.grid_point(i), t.bound_omegas);
  return t;
}

OverlapTable overlaps_serial(const SystemSpec& sys, const std::vector<BoundState>& states,
                             int n_grid) {
  auto t = table_header(sys, states, n_grid);
  const int n = static_cast<int>(t.xi_samples.size());
  for (int i = 0; i < n; ++i) t.xi_samples[i] = xi_exact(sys, t.grid_point(i), t.bound_omegas);
  return t;
}

Completeness completeness(const OverlapTable& tab, int n, double w_lo, double w_hi,
                          bool add_tail) {
  Completeness c;
  for (int a = 0; a < tab.n_bound(); ++a) c.bound_part += std::norm(tab.eps(a, n));
  auto f = [&](double w) -> cplx { return std::norm(tab.xi(n, w)); };
  // split at the period of the coupling oscillation so GK never aliases it
  const double t = tab.system.emitters[n].delay;
  const double wn = tab.system.emitters[n].omega;
  const double piece = std::max(kPi / std::max(t, 1e-12), 0.05);
  auto panels = [&](double a, double b) {
    std::vector<double> br{a};
    for (double x = a + piece; x < b; x += piece) br.push_back(x);
    br.push_back(b);
    for (double s : tab.bound_omegas)
      if (s > a && s < b) br.push_back(s);
    std::sort(br.begin(), br.end());
    return br;
  };
  c.continuum_part = num::integrate(f, panels(w_lo, w_hi), 1e-12).value.real();
  if (add_tail && tab.exact) {
    // exact |xi|^2 out to L beyond each edge, then the averaged 1/w^2 law
    const double g = tab.system.emitters[n].gamma;
    const double L = 1000.0 * std::max(tab.system.max_gamma(), 1e-12);
    c.tail_estimate = num::integrate(f, panels(w_hi, w_hi + L), 1e-12).value.real() +
                      num::integrate(f, panels(w_lo - L, w_lo), 1e-12).value.real() +
                      g / kPi * (1.0 / (w_hi + L - wn) + 1.0 / (wn - w_lo + L));
  }
  return c;
}

namespace {
nlohmann::json cvec_json(const CVec& v) {
  auto j = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back({v(i).real(), v(i).imag()});
  return j;
}
}  // namespace

nlohmann::json bound_states_to_json(const std::vector<BoundState>& states) {
  auto arr = nlohmann::json::array();
  for (const auto& s : states) {
    nlohmann::json j;
    j["omega"] = s.omega_b;
    j["v"] = cvec_json(s.v);
    j["epsilon"] = cvec_json(s.v.conjugate());
    j["norm_check"] = s.norm_check;
    j["consistency"] = s.consistency;
    CVec seg(s.segment_coeffs.size());
    for (std::size_t k = 0; k < s.segment_coeffs.size(); ++k) seg(k) = s.segment_coeffs[k];
    j["segment_coeffs"] = cvec_json(seg);
    arr.push_back(j);
  }
  return arr;
}

nlohmann::json overlaps_to_json(const OverlapTable& tab) {
  nlohmann::json j;
  j["bound_omegas"] = tab.bound_omegas;
  auto eps = nlohmann::json::array();
  for (int a = 0; a < tab.n_bound(); ++a) eps.push_back(cvec_json(tab.eps.row(a).transpose()));
  j["epsilon"] = eps;
  j["grid"] = {{"min", tab.grid_min}, {"step", tab.grid_step}, {"n", tab.xi_samples.size()}};
  auto xs = nlohmann::json::array();
  for (const auto& x : tab.xi_samples) xs.push_back(cvec_json(x));
  j["xi"] = xs;
  j["interpolation"] = tab.exact ? "closed form" : "cubic lagrange";
  return j;
}

}  // namespace wqed
