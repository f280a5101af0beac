#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "wqed/model.hpp"

using namespace wqed;

namespace {
bool has_code(const std::vector<Diagnostic>& d, const std::string& code, int emitter) {
  return std::any_of(d.begin(), d.end(),
                     [&](const Diagnostic& x) { return x.code == code && x.emitter == emitter; });
}
}  // namespace

TEST_SUITE("model") {

TEST_CASE("validation diagnostics") {
  CHECK(validate(make_feedback_system({{kPi / 2, 1.0, 2.0}})).empty());
  CHECK(has_code(validate(make_feedback_system({{kPi / 2, -1.0, 2.0}})), "negative_gamma", 1));
  CHECK(has_code(validate(make_feedback_system({{kPi / 2, 1.0, 2.0}, {kPi / 2, 1.0, 2.0}})),
                 "delays_not_increasing", 2));
  SystemSpec empty;
  CHECK(has_code(validate(empty), "no_emitters", 0));
  CHECK_THROWS_AS(require_valid(empty), ConfigError);
}

TEST_CASE("bound-state condition") {
  CHECK(bound_state_condition(make_feedback_system({{kPi / 2, 1.0, 2.0}}))[0]);
  CHECK_FALSE(bound_state_condition(make_feedback_system({{kPi / 2 + 0.1, 1.0, 2.0}}))[0]);
  auto two = bound_state_condition(make_feedback_system({{kPi / 2, 1.0, 2.0}, {kPi / 2, 1.0, 4.0}}));
  CHECK(two == std::vector<bool>{true, true});
  CHECK(degenerate_feedback(make_feedback_system({{kPi / 2, 1.0, 2.0}, {kPi / 2, 1.0, 4.0}})));
}

TEST_CASE("feedback coupling values") {
  auto a = make_feedback_system({{kPi / 2, 1.0, 2.0}});
  CHECK(std::abs(coupling_value(a, 1, kPi / 4) - cplx(0, 2)) < 1e-15);
  CHECK(std::abs(coupling_value(a, 1, 0.0)) == 0.0);
  auto b = make_feedback_system({{kPi / 2, 0.25, 1.0}});
  CHECK(std::abs(coupling_value(b, 1, kPi / 2) - cplx(0, 1)) < 1e-15);
  CHECK_THROWS_AS(coupling_value(a, 2, 1.0), std::out_of_range);
}

TEST_CASE("default window and json round trip") {
  auto s = make_feedback_system({{2 * kPi, 1.0, 0.5}, {2 * kPi, 0.5, 1.0}});
  CHECK(s.window_min == doctest::Approx(2 * kPi - 20.0));
  CHECK(s.window_max == doctest::Approx(2 * kPi + 20.0));
  auto r = system_from_json(system_to_json(s));
  REQUIRE(r.size() == 2);
  CHECK(r.emitters[1].gamma == 0.5);
  CHECK(r.emitters[1].delay == 1.0);
  CHECK(r.window_max == s.window_max);
}

}
