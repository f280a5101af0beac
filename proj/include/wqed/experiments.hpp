#pragma once

#include <vector>

#include "wqed/scatter.hpp"

namespace wqed {

// One emitter in front of a mirror, gamma = 1 units, omega0 = n_pi * pi / t_d so
// that a bound state exists.
SystemSpec single_mirror_system(double t_d, double gamma = 1.0, int n_pi = 1);

// Two degenerate emitters at omega0 = 2 pi with delays 0.5 and 1.
SystemSpec two_mirror_system();

// Closed forms for a single emitter with omega0 t_d = n pi, in the conventions of
// OverlapTable (xi = conj(beta)).
double epsilon_closed_form(double gamma, double t_d);
cplx xi_closed_form(double omega0, double gamma, double t_d, double w);

struct DelayPoint {
  double t_d = 0.0;
  double omega0 = 0.0;
  int n_bound = 0;
  double epsilon = 0.0;  // |eps| of the first bound state, 0 when none was found
  double epsilon_closed = 0.0;
};
std::vector<DelayPoint> delay_sweep(const std::vector<double>& delays, double gamma, int n_pi);

// One point of the single-emitter trapping sweep: the bound and the optimal
// packets at the requested bandwidths, all centred at Omega_star.
struct TrapRow {
  double gamma_td = 0.0;
  double P_ub = 0.0;
  double Omega_star = 0.0;
  std::vector<double> P;  // one per Delta
};
TrapRow trapping_row(double t_d, const std::vector<double>& deltas, double gamma = 1.0,
                     int n_pi = 1);

}  // namespace wqed
