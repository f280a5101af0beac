#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "wqed/experiments.hpp"
#include "wqed/scatter.hpp"

using namespace wqed;

namespace {
const Scatterer& single() {
  static Scatterer sc = [] {
    auto sys = single_mirror_system(2.0);
    return Scatterer(overlaps(sys, find_bound_states(sys).states));
  }();
  return sc;
}
const Scatterer& pair() {
  static Scatterer sc = [] {
    auto sys = two_mirror_system();
    return Scatterer(overlaps(sys, find_bound_states(sys).states));
  }();
  return sc;
}
}  // namespace

TEST_SUITE("scatter") {

TEST_CASE("green function at zero time and delay-route agreement") {
  const auto& T = single().tmatrix().green();
  CHECK(std::abs(T.at(0, 0)(0.0) - 1.0) < 1e-3);
  // the spectral route agrees up to the window truncation
  auto gs = green_table_spectral(single().overlaps(), single().overlaps().system.mean_omega());
  for (double t : {1.0, 3.0, 6.0}) CHECK(std::abs(gs.at(0, 0)(t) - T.at(0, 0)(t)) < 0.05);
}

TEST_CASE("single-excitation amplitude revives after a mirror round trip") {
  auto sys = single_mirror_system(4.0);
  auto G = green_function(overlaps(sys, find_bound_states(sys).states), 0, 0);
  // decays until the emitted field returns at 2 t_d, then rises again
  CHECK(std::abs(G(7.9)) < std::abs(G(8.6)));
}

TEST_CASE("T matrix symmetry and pole guard") {
  const auto& sc = pair();
  const double c = 4.0 * kPi;
  for (double d : {0.7, -1.3, 2.9}) {
    CMat T = sc.t_matrix(c + d);
    CHECK(std::abs(T(0, 1) - T(1, 0)) < 1e-8 * T.norm());
  }
  CHECK_THROWS_AS(sc.t_matrix(c), NumericalError);
}

TEST_CASE("T matrix against the damped-integral oracle at the trapping energy") {
  const auto& sc = single();
  const double Om = 2 * sc.overlaps().system.emitters[0].omega + 0.95;
  auto ref = t_matrix_eta_oracle(sc.overlaps(), {Om});
  CMat T = sc.t_matrix(Om);
  CHECK((T - ref[0]).norm() / T.norm() < 1e-4);
}

TEST_CASE("trapping amplitude symmetry and nodes") {
  const auto& sc = single();
  const double w0 = sc.overlaps().system.emitters[0].omega;
  const double w = w0 + 0.95;
  cplx a = sc.gamma_amplitude(0, w, w0 + 0.3, w0 + 0.65);
  cplx b = sc.gamma_amplitude(0, w, w0 + 0.65, w0 + 0.3);
  CHECK(std::abs(a - b) < 1e-12 * std::abs(a));
  // sin(nu t_d) = 0 at nu = 2 pi / t_d
  CHECK(std::abs(sc.gamma_amplitude(0, w, kPi, 2 * w0 + 0.95 - kPi)) < 1e-12);
}

TEST_CASE("upper bound location") {
  const auto& sc = single();
  auto ub = sc.upper_bound(0);
  const double w0 = sc.overlaps().system.emitters[0].omega;
  CHECK(std::abs(ub.Omega_star - 2 * w0 - 0.95) < 0.1);
  CHECK(ub.P_ub > 0.9);
  CHECK(ub.P_ub <= 1.0);
}

TEST_CASE("optimal packet approaches the bound as Delta shrinks") {
  auto row = trapping_row(2.0, {0.4, 0.2, 0.1});
  CHECK(row.P[0] <= row.P[1]);
  CHECK(row.P[1] <= row.P[2]);
  CHECK(row.P[2] <= row.P_ub + 1e-9);
  CHECK(row.P[2] >= 0.9);
}

TEST_CASE("normalization and zero packets") {
  const auto& sc = pair();
  std::mt19937_64 rng(17);
  auto p = random_structured_packet(rng, 2, 4 * kPi - 1, 4 * kPi + 1, 0.1, 0.3);
  sc.normalize(p);
  CHECK(sc.norm2(p) == doctest::Approx(1.0).epsilon(1e-8));
  auto z = make_grid_packet(2 * kPi - 1, 0.5, CMat::Zero(5, 5));
  for (double P : sc.trapping_probabilities(z)) CHECK(P == 0.0);
}

TEST_CASE("random grid packets stay below the bound") {
  const auto& sc = single();
  const double ub = sc.upper_bound(0).P_ub;
  const double w0 = sc.overlaps().system.emitters[0].omega;
  std::mt19937_64 rng(23);
  for (int i = 0; i < 10; ++i) {
    auto p = random_grid_packet(rng, w0, 2.0, 41);
    CHECK(std::abs(p.grid(3, 7) - p.grid(7, 3)) < 1e-15);
    CHECK(sc.trapping_probability(0, p) <= ub + 1e-6);
  }
}

TEST_CASE("X is a Gram matrix") {
  const auto& sc = pair();
  for (double d : {-2.0, 0.5, 2.4}) {
    CMat X = sc.X(4 * kPi + d);
    CHECK((X - X.adjoint()).norm() < 1e-14 * X.norm());
    Eigen::SelfAdjointEigenSolver<CMat> es(X);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("single-emitter design matches the trapping probability for narrow packets") {
  const auto& sc = single();
  const double Om = sc.upper_bound(0).Omega_star;
  auto d = sc.design_matrices(Om);
  REQUIRE(d.S.rows() == 1);
  auto p = sc.superposition_packet(CVec::Ones(1), Om, 0.01);
  // P of the xi* xi* ansatz in the narrow limit: |S|^2 |c|^2 norm^2 scaled by the envelope
  const double P = sc.trapping_probability(0, p);
  const double pred = std::norm(d.S(0, 0)) * p.norm * p.norm;
  CHECK(P == doctest::Approx(pred).epsilon(2e-3));
}

TEST_CASE("superposition design") {
  const auto& sc = pair();
  const double O = 4 * kPi + 2.4;
  auto d = sc.design_matrices(O);
  CHECK(std::abs(d.S.determinant()) > 1e-6);
  auto r = sc.design_input(CVec::Unit(2, 0), O, 0.15);
  CHECK(r.fidelity == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(r.c_out(1)) < 1e-10 * std::abs(r.c_out(0)));
  CHECK(r.condition_number < 1e3);
  CHECK_THROWS_AS(sc.design_input(CVec::Ones(3), O, 0.15), ConfigError);
  const double s = 1 / std::sqrt(2.0);
  auto eq = sc.design_input((CVec(2) << s, s).finished(), O, 0.15);
  CHECK(eq.fidelity_finite_delta > 0.95);
}

}
