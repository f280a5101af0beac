#include "wqed/experiments.hpp"

#include <cmath>

namespace wqed {

SystemSpec single_mirror_system(double t_d, double gamma, int n_pi) {
  if (!(t_d > 0)) throw ConfigError("single mirror system: delay must be positive");
  return make_feedback_system({{n_pi * kPi / t_d, gamma, t_d}});
}

SystemSpec two_mirror_system() {
  return make_feedback_system({{2.0 * kPi, 1.0, 0.5}, {2.0 * kPi, 1.0, 1.0}});
}

double epsilon_closed_form(double gamma, double t_d) { return 1.0 / std::sqrt(1.0 + 2.0 * gamma * t_d); }

cplx xi_closed_form(double omega0, double gamma, double t_d, double w) {
  const double sg = std::sqrt(gamma);
  cplx v;
  const double d = w - omega0;
  if (d == 0.0) {
    const long n = std::lround(omega0 * t_d / kPi);
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    v = 2.0 * kI * sg * sign * t_d / (1.0 + 2.0 * gamma * t_d);
  } else {
    const double s = std::sin(w * t_d);
    v = 2.0 * kI * sg * s / (d + 2.0 * gamma * s * std::exp(-kI * w * t_d));
  }
  return std::conj(v) / std::sqrt(2.0 * kPi);
}

std::vector<DelayPoint> delay_sweep(const std::vector<double>& delays, double gamma, int n_pi) {
  std::vector<DelayPoint> out(delays.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < delays.size(); ++i) {
    auto sys = single_mirror_system(delays[i], gamma, n_pi);
    auto bs = find_bound_states(sys);
    DelayPoint& p = out[i];
    p.t_d = delays[i];
    p.omega0 = sys.emitters[0].omega;
    p.n_bound = static_cast<int>(bs.states.size());
    if (!bs.states.empty()) p.epsilon = std::abs(bs.states[0].v(0));
    p.epsilon_closed = epsilon_closed_form(gamma, delays[i]);
  }
  return out;
}

TrapRow trapping_row(double t_d, const std::vector<double>& deltas, double gamma, int n_pi) {
  auto sys = single_mirror_system(t_d, gamma, n_pi);
  auto bs = find_bound_states(sys);
  if (bs.states.empty()) throw NumericalError("trapping sweep: no bound state found");
  Scatterer sc(overlaps(sys, bs.states));
  TrapRow row;
  row.gamma_td = gamma * t_d;
  auto ub = sc.upper_bound(0);
  row.P_ub = ub.P_ub;
  row.Omega_star = ub.Omega_star;
  for (double D : deltas) {
    auto p = sc.optimal_wavepacket(0, D * gamma, ub.Omega_star);
    row.P.push_back(sc.trapping_probability(0, p));
  }
  return row;
}

}  // namespace wqed
