#include <doctest.h>

#include <cmath>

#include "cfp/peak_widening.hpp"

using namespace cfp;

TEST_CASE("phi integrates the curvature along the unstable path") {
  DoubleWell dw(Potential::quartic());
  PathFn at_zero = [](double) { return 0.0; };
  CHECK(phi_of_t(at_zero, dw.pot(), 1.0, 1.75) == doctest::Approx(-3.0).epsilon(1e-12));
  PathFn moving = [](double t) { return t; };  // H''(t) = 12t^2 - 4
  CHECK(phi_of_t(moving, dw.pot(), 0.0, 0.5) == doctest::Approx(4 * 0.125 - 2).epsilon(1e-12));
  CHECK(beta_at(dw, 0.0) == doctest::Approx(4.0));
}

TEST_CASE("splitting time on a constant unstable position") {
  DoubleWell dw(Potential::quartic());
  PathFn at_zero = [](double) { return 0.0; };
  for (double a : {0.1, 0.5, 1.0}) {
    auto ts = splitting_time(at_zero, dw, a, 2.0, 10.0);
    REQUIRE(ts);
    CHECK(*ts == doctest::Approx(2.0 + a / 4).epsilon(1e-12));
  }
  CHECK_FALSE(splitting_time(at_zero, dw, 100.0, 2.0, 3.0));
}

TEST_CASE("width grows like exp(-2 phi / tau) and the log form avoids overflow") {
  DoubleWell dw(Potential::quartic());
  PathFn at_zero = [](double) { return 0.0; };
  const double tau = 0.01, a = 0.5;
  double l1 = log_width_squared(at_zero, dw.pot(), tau, a, 0.0, 1.0, 1.05);
  double l2 = log_width_squared(at_zero, dw.pot(), tau, a, 0.0, 1.0, 1.10);
  CHECK(l2 - l1 == doctest::Approx(2 * 4 * 0.05 / tau).epsilon(1e-6));
  double w = width_squared(at_zero, dw.pot(), 0.5, a, 0.0, 1.0, 1.1);
  CHECK(std::log(w) == doctest::Approx(log_width_squared(at_zero, dw.pot(), 0.5, a, 0.0, 1.0, 1.1)).epsilon(1e-12));
  double lw = log_width_squared(at_zero, dw.pot(), 2e-3, a, 0.0, 1.0, 1.5);
  CHECK(std::isfinite(lw));
  CHECK(lw > 700);
  auto st = width_state(at_zero, dw.pot(), 0.5, a, 0.0, 1.0, 1.1);
  CHECK(st.phi == doctest::Approx(-0.4));
  CHECK(st.w2 == doctest::Approx(w));
}
