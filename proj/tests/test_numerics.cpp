#include <doctest.h>

#include <cmath>
#include <random>

#include "wqed/numerics.hpp"
#include "wqed/wavepacket.hpp"

using namespace wqed;

TEST_SUITE("numerics") {

TEST_CASE("quadrature of sin over a half period") {
  auto r = num::integrate([](double x) { return cplx(std::sin(x)); }, 0.0, kPi);
  CHECK(r.converged);
  CHECK(std::abs(r.value - 2.0) < 1e-10);
}

TEST_CASE("gaussian envelope is normalized") {
  Envelope f{3.0, 0.2};
  auto r = num::integrate([&](double x) { return cplx(f(x) * f(x)); }, 3.0 - 10 * 0.2, 3.0 + 10 * 0.2);
  CHECK(std::abs(r.value - 1.0) < 1e-8);
}

TEST_CASE("damped oscillatory integral against its closed form") {
  for (double Om : {0.0, 2.5, 17.0}) {
    auto f = [&](double t) { return std::exp(kI * Om * t - t); };
    std::vector<double> br;
    for (double x = 0; x <= 40.0; x += 0.5) br.push_back(x);
    auto r = num::integrate(f, br, 1e-13);
    cplx exact = 1.0 / (1.0 - kI * Om) * (1.0 - std::exp((kI * Om - 1.0) * 40.0));
    CHECK(std::abs(r.value - exact) < 1e-9);
  }
}

TEST_CASE("linear solves") {
  CMat I = CMat::Identity(3, 3);
  CVec b(3);
  b << 1.0, cplx(0, 2), -3.0;
  CHECK((num::solve_linear(I, b).x - b).norm() < 1e-15);

  // 2x2 Hermitian PSD against the adjugate inverse
  CMat A(2, 2);
  A << 2.0, cplx(0.3, -0.4), cplx(0.3, 0.4), 1.5;
  cplx det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
  CMat inv(2, 2);
  inv << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
  inv /= det;
  CVec x = num::solve_linear(A, b.head(2)).x;
  CHECK((x - inv * b.head(2)).norm() < 1e-12);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1);
  CMat R(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) R(i, j) = cplx(g(rng), g(rng)) + (i == j ? 6.0 : 0.0);
  CVec rhs = CVec::Random(8);
  auto s = num::solve_linear(R, rhs);
  CHECK((R * s.x - rhs).norm() < 1e-10);
  CHECK(s.condition < 1e3);

  CHECK_THROWS_AS(num::solve_linear(CMat::Zero(2, 2), b.head(2)), NumericalError);
}

TEST_CASE("bracketed root") {
  CHECK(num::find_root_bracketed([](double x) { return x - 1.0; }, 0.0, 2.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(num::find_root_bracketed([](double x) { return x * x + 1.0; }, 0.0, 2.0),
                  NumericalError);
}

TEST_CASE("maximization") {
  auto r = num::maximize_1d([](double x) { return -(x - 1) * (x - 1); }, 0.0, 2.0);
  CHECK(r.x == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(r.value) < 1e-10);
  // two peaks, the right one higher
  auto g = [](double x) { return std::exp(-50 * (x - 0.3) * (x - 0.3)) + 1.2 * std::exp(-50 * (x - 1.6) * (x - 1.6)); };
  auto m = num::maximize_1d(g, 0.0, 2.0);
  CHECK(m.x == doctest::Approx(1.6).epsilon(1e-5));
  CHECK(m.value == doctest::Approx(1.2).epsilon(1e-8));
}

TEST_CASE("filon rule is exact for piecewise linear data") {
  std::vector<cplx> F{1.0, cplx(2, 1), cplx(0.5, -1), 3.0};
  const double dt = 0.4, w = 7.3;
  cplx exact = 0.0;
  for (int k = 0; k + 1 < 4; ++k) {
    auto seg = [&](double t) { return (F[k] + (F[k + 1] - F[k]) * ((t - k * dt) / dt)) * std::exp(kI * w * t); };
    exact += num::integrate(seg, k * dt, (k + 1) * dt, 1e-14).value;
  }
  CHECK(std::abs(num::filon_linear(F.data(), F.size(), dt, w) - exact) < 1e-12);
}

TEST_CASE("dft against the direct sum") {
  std::vector<cplx> in{1.0, cplx(0, 1), -2.0, cplx(0.5, 0.5), 3.0};
  for (int sign : {-1, 1}) {
    auto out = num::dft(in, sign);
    for (int j = 0; j < 5; ++j) {
      cplx s = 0.0;
      for (int k = 0; k < 5; ++k) s += in[k] * std::exp(sign * 2.0 * kPi * kI * double(j * k) / 5.0);
      CHECK(std::abs(out[j] - s) < 1e-12);
    }
  }
}

TEST_CASE("trapezoid") {
  std::vector<double> y{0.0, 1.0, 2.0, 3.0};
  CHECK(num::trapezoid(y, 0.5) == doctest::Approx(2.25));
}

}
