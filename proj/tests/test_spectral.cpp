#include <doctest.h>

#include <cmath>
#include <random>

#include "wqed/experiments.hpp"
#include "wqed/spectral.hpp"

using namespace wqed;

TEST_SUITE("spectral") {

TEST_CASE("M matrix of a single emitter") {
  auto sys = make_feedback_system({{kPi / 2, 1.0, 2.0}});
  CHECK(std::abs(build_M(sys, kPi / 2).M(0, 0)) < 1e-15);
  // frozen: 0.5 + 2 sin(pi + 1) exp(-i (pi + 1))
  const cplx frozen(1.4092974268256815, -1.416146836547142);
  CHECK(std::abs(build_M(sys, kPi / 2 + 0.5).M(0, 0) - frozen) < 1e-13);
}

TEST_CASE("M is symmetric for two emitters") {
  auto sys = make_feedback_system({{1.0, 1.0, 0.7}, {1.3, 0.5, 1.9}});
  for (double w : {0.2, 1.1, 3.7}) {
    CMat M = build_M(sys, w).M;
    CHECK(std::abs(M(0, 1) - M(1, 0)) < 1e-14);
  }
}

TEST_CASE("scattering amplitude of a single emitter") {
  auto sys = make_feedback_system({{kPi / 2, 1.0, 2.0}});
  auto s = solve_scattering_state(sys, kPi / 2 + 0.5);
  // frozen |b|^2 of the raw solution; beta carries the extra 1/sqrt(2 pi)
  CHECK(std::norm(s.b(0)) == doctest::Approx(0.7095650837459463).epsilon(1e-12));
  CHECK(std::norm(s.beta(0)) == doctest::Approx(0.11293079052358203).epsilon(1e-12));
}

TEST_CASE("unit transmission at random frequencies") {
  std::mt19937_64 rng(11);
  for (const auto& sys : {single_mirror_system(2.0), two_mirror_system(),
                          make_feedback_system({{1.0, 0.3, 0.4}, {1.5, 1.0, 1.3}, {0.8, 0.6, 2.2}})}) {
    std::uniform_real_distribution<double> U(sys.window_min, sys.window_max);
    for (int i = 0; i < 50; ++i) CHECK(std::abs(std::abs(solve_scattering_state(sys, U(rng)).tau) - 1.0) < 1e-10);
  }
}

TEST_CASE("far detuned amplitude falls off as 1/detuning") {
  auto sys = make_feedback_system({{kPi / 2, 1.0, 2.0}});
  for (double d : {15.0, 40.0, 120.0}) {
    auto s = solve_scattering_state(sys, kPi / 2 + d + 0.3);
    CHECK(std::abs(s.b(0)) * d < 2.0 * 1.2);
  }
}

TEST_CASE("single emitter bound state") {
  auto sys = make_feedback_system({{kPi / 2, 1.0, 2.0}});
  auto bs = find_bound_states(sys);
  REQUIRE(bs.states.size() == 1);
  const auto& b = bs.states[0];
  CHECK(b.omega_b == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(std::abs(b.v(0)) == doctest::Approx(0.4472135954999579).epsilon(1e-12));
  // photonic weight 2 gamma t / (1 + 2 gamma t) = 4/5
  CHECK(b.profile.inner_norm2() == doctest::Approx(0.8).epsilon(1e-10));
  CHECK(std::abs(bound_state_profile(b, 3.0)) == 0.0);
  CHECK(std::abs(bound_state_profile(b, -3.0)) == 0.0);
  CHECK(b.norm_check < 1e-10);
}

TEST_CASE("degenerate pair has two orthonormal bound states") {
  auto sys = make_feedback_system({{kPi / 2, 1.0, 2.0}, {kPi / 2, 1.0, 4.0}});
  auto bs = find_bound_states(sys);
  REQUIRE(bs.states.size() == 2);
  for (int a = 0; a < 2; ++a) {
    CHECK(bs.states[a].omega_b == doctest::Approx(kPi / 2).epsilon(1e-12));
    for (int c = 0; c < 2; ++c)
      CHECK(std::abs(inner(bs.states[a], bs.states[c]) - (a == c ? 1.0 : 0.0)) < 1e-10);
  }
}

TEST_CASE("detuned emitter has no bound state") {
  auto bs = find_bound_states(make_feedback_system({{kPi / 2 + 0.1, 1.0, 2.0}}));
  CHECK(bs.states.empty());
  CHECK_FALSE(bs.rejected.empty());
}

TEST_CASE("bound and scattering states are orthogonal") {
  auto sys = two_mirror_system();
  auto bs = find_bound_states(sys);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(sys.window_min, sys.window_max);
  for (int i = 0; i < 20; ++i) {
    auto s = solve_scattering_state(sys, U(rng));
    for (const auto& b : bs.states) CHECK(std::abs(inner(b, s)) < 1e-10);
    auto s2 = solve_scattering_state(sys, U(rng));
    CHECK(std::abs(scattering_offdiag(s, s2)) < 1e-10);
  }
}

TEST_CASE("overlap table") {
  auto sys = make_feedback_system({{kPi / 2, 1.0, 2.0}});
  auto bs = find_bound_states(sys);
  auto tab = overlaps(sys, bs.states);
  CHECK(std::abs(tab.eps(0, 0)) == doctest::Approx(1 / std::sqrt(5.0)).epsilon(1e-12));
  for (int i : {3, 1000, 2345}) {
    auto s = solve_scattering_state(sys, tab.grid_point(i));
    CHECK(std::abs(tab.xi_samples[i](0) - std::conj(s.beta(0))) < 1e-14);
  }
  auto c = completeness(tab, 0, sys.window_min, sys.window_max);
  CHECK(std::abs(c.total() - 1.0) < 1e-3);
  // the serial build gives identical samples
  auto ser = overlaps_serial(sys, bs.states);
  bool same = true;
  for (std::size_t i = 0; i < tab.xi_samples.size(); ++i) same = same && tab.xi_samples[i] == ser.xi_samples[i];
  CHECK(same);
}

TEST_CASE("xi closed form and epsilon law") {
  for (double td : {0.3, 1.0, 2.5}) {
    auto sys = single_mirror_system(td);
    auto tab = overlaps(sys, find_bound_states(sys).states);
    const double w0 = sys.emitters[0].omega;
    CHECK(std::abs(tab.eps(0, 0)) == doctest::Approx(1 / std::sqrt(1 + 2 * td)).epsilon(1e-12));
    for (double d : {-3.1, -0.4, 0.0, 0.25, 5.0})
      CHECK(std::abs(tab.xi(0, w0 + d) - xi_closed_form(w0, 1.0, td, w0 + d)) < 1e-10);
  }
}

TEST_CASE("three-emitter degenerate system") {
  auto sys = make_feedback_system({{kPi, 1.0, 1.0}, {kPi, 0.5, 2.0}, {kPi, 2.0, 3.0}});
  auto bs = find_bound_states(sys);
  CHECK(bs.states.size() == 3);
  auto tab = overlaps(sys, bs.states);
  for (int n = 0; n < 3; ++n)
    CHECK(std::abs(completeness(tab, n, sys.window_min, sys.window_max).total() - 1.0) < 1e-3);
}

}
