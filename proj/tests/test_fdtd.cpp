#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "wqed/experiments.hpp"
#include "wqed/fdtd.hpp"

using namespace wqed;

namespace {
const Scatterer& single(double td) {
  static std::map<double, Scatterer> cache;
  auto it = cache.find(td);
  if (it == cache.end()) {
    auto sys = single_mirror_system(td);
    it = cache.emplace(td, Scatterer(overlaps(sys, find_bound_states(sys).states))).first;
  }
  return it->second;
}
}  // namespace

TEST_SUITE("fdtd") {

TEST_CASE("lattice checks") {
  auto sys = single_mirror_system(0.5);
  Lattice lat;
  lat.h = 0.04;  // 0.5 is not a multiple
  lat.x_min = -10;
  lat.x_max = 2;
  CHECK_THROWS_AS(check_lattice(lat, sys), ConfigError);
  lat.h = 0.05;
  lat.n_steps = 100;
  CHECK_NOTHROW(check_lattice(lat, sys));
  lat.n_steps = 1000;  // sources leave the domain
  CHECK_THROWS_AS(check_lattice(lat, sys), ConfigError);
}

TEST_CASE("zero state stays zero") {
  auto sys = two_mirror_system();
  Lattice lat;
  lat.h = 0.05;
  lat.x_min = -8;
  lat.x_max = 2;
  auto s = zero_state(sys, lat);
  for (int k = 0; k < 100; ++k) CHECK(step(s, sys) == 0.0);
  CHECK(norm(s).total() == 0.0);
  auto tab = overlaps(sys, find_bound_states(sys).states);
  for (double P : extract_trapping(s, tab).P) CHECK(P == 0.0);
}

TEST_CASE("spectator photon reproduces the single-excitation delay dynamics") {
  auto sys = two_mirror_system();
  Lattice lat;
  lat.h = 0.01;
  lat.x_min = -12;
  lat.x_max = 3;
  lat.double_precision = true;
  auto s = zero_state(sys, lat);
  const long i0 = lat.index(2.0);
  s.psi1[0][i0] = 1.0;
  // independent reference: the delay equation on a ten times finer step
  const double w = sys.mean_omega();
  auto ref = delay_response(sys, 0, 0.001, 9000, w);
  double err = 0.0;
  for (int k = 1; k <= 900; ++k) {
    step(s, sys);
    if (k % 30 == 0)
      for (int m = 0; m < 2; ++m) err = std::max(err, std::abs(s.psi1[m][i0] - ref[(10 * k) * 2 + m]));
  }
  CHECK(err < 1e-4);
}

TEST_CASE("history replay matches the stepped field") {
  auto sys = two_mirror_system();
  Lattice lat;
  lat.h = 0.05;
  lat.x_min = -15;
  lat.x_max = 1.5;
  lat.double_precision = true;
  auto s = zero_state(sys, lat, true);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  const long n = lat.size();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j <= i; ++j) {
      double y1 = lat.y(i), y2 = lat.y(j);
      if (y1 < -6 && y2 < -6 && y1 > -14 && y2 > -14) {
        cplx v(g(rng), g(rng));
        s.psi2d(i, j) = v;
        s.psi2_initial[i][j] = v;
        s.psi2_initial[j][i] = v;
      }
    }
  CHECK(std::abs(eval_psi2(s, sys, 40, 30) - s.psi2(40, 30)) == 0.0);
  for (int k = 0; k < 200; ++k) step(s, sys);
  double e = 0.0;
  for (long i = 0; i < n; i += 7)
    for (long j = 0; j < n; j += 5) e = std::max(e, std::abs(eval_psi2(s, sys, i, j) - s.psi2(i, j)));
  CHECK(e < 1e-6);
  // cells right of every source are never touched
  const long r = lat.index(1.2);
  CHECK(s.psi2(r, r) == s.psi2_initial[r][r]);
}

TEST_CASE("sampled packet is normalized and its extent scales with 1/Delta") {
  const auto& sc = single(2.0);
  // |psi|^2 along X = (y1 + y2) / 2 is Gaussian with sigma = 1 / (sqrt 2 Delta); cutting
  // 1e-7 of the mass from each tail (z = 5.2) widens the support by 2 z sigma
  double width[2];
  int k = 0;
  for (double D : {0.05, 0.1}) {
    PositionPacket pp(sc, sc.optimal_wavepacket(0, D), 0.05);
    width[k++] = pp.support().X_hi - pp.support().X_lo;
  }
  const double slope = (width[0] - width[1]) / (1 / 0.05 - 1 / 0.1);
  const double predicted = 2 * 5.2 / std::sqrt(2.0);
  CHECK(slope > 0.8 * predicted);
  CHECK(slope < 1.1 * predicted);

  auto p = sc.optimal_wavepacket(0, 0.4);
  RunOptions ro;
  ro.h = 0.05;
  PositionPacket pp(sc, p, ro.h);
  auto plan = plan_run(sc.overlaps().system, pp.support(), ro);
  auto s = init_from_wavepacket(pp, sc.overlaps().system, plan.lattice, plan.X_shift);
  CHECK(norm(s).total() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.init_norm == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("norm drift is second order and P first order in h") {
  const auto& sc = single(1.0);
  auto p = sc.optimal_wavepacket(0, 0.4);
  const double Ps = sc.trapping_probability(0, p);
  std::vector<double> P, drift;
  for (double h : {0.1, 0.05, 0.025}) {
    RunOptions ro;
    ro.h = h;
    auto rep = simulate(sc, p, ro);
    P.push_back(rep.trap.P[0]);
    drift.push_back(rep.result.norm_drift);
  }
  CHECK(std::abs(P[2] - Ps) < 0.02);
  const double ratio = (P[0] - P[1]) / (P[1] - P[2]);
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
  CHECK(drift[1] < 0.6 * drift[0]);
  CHECK(drift[2] < 0.6 * drift[1]);
}

TEST_CASE("extraction for a single emitter is the scalar inversion") {
  const auto& sc = single(1.0);
  auto p = sc.optimal_wavepacket(0, 0.4);
  RunOptions ro;
  ro.h = 0.05;
  auto rep = simulate(sc, p, ro);
  const auto& s = rep.result.state;
  double w = 0.0;
  for (const auto& x : s.psi1[0]) w += std::norm(x) * s.lattice.h;
  const double eps = std::abs(sc.overlaps().eps(0, 0));
  CHECK(rep.trap.P[0] == doctest::Approx(w / (eps * eps)).epsilon(1e-10));
  CHECK(rep.result.residual_emitters < 1e-3);
}

}
