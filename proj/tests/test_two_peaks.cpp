#include <doctest.h>

#include <cmath>

#include "cfp/errors.hpp"
#include "cfp/two_peaks.hpp"

using namespace cfp;

TEST_CASE("quasi-stationary states share the force and satisfy the constraint") {
  DoubleWell dw(Potential::quartic());
  const double m1 = 0.3;
  for (double ell : {0.1, 0.3, 0.55}) {
    auto q = qs_solve(dw, m1, ell, Branch::Minus, Branch::Plus);
    CHECK(m1 * q.x1 + (1 - m1) * q.x2 == doctest::Approx(ell).epsilon(1e-12).scale(1));
    CHECK(dw.dH(q.x1) == doctest::Approx(q.sigma).epsilon(1e-10).scale(1));
    CHECK(dw.dH(q.x2) == doctest::Approx(q.sigma).epsilon(1e-10).scale(1));
    CHECK(q.x1 < -dw.lm().x_star);
    CHECK(q.x2 > dw.lm().x_star);
  }
  // past the corner the light peak sits on the unstable branch
  const double corner = -m1 * dw.lm().x_star + (1 - m1) * dw.lm().x_starstar;
  auto q = qs_track(dw, m1, corner + 0.02);
  CHECK(q.b1 == Branch::Zero);
  CHECK(std::abs(q.x1) < dw.lm().x_star);
  CHECK_THROWS_AS(qs_solve(dw, 1.5, 0.0, Branch::Minus, Branch::Plus), DomainError);
}

TEST_CASE("tangency root exists for a light unstable peak only") {
  DoubleWell dw(Potential::quartic());
  auto s = tangency(dw, 0.1);
  REQUIRE(s);
  CHECK(std::abs(tangency_function(dw, 0.1, *s)) < 1e-10);
  CHECK(std::abs(*s) < dw.lm().sigma_star);
  CHECK_FALSE(tangency(dw, 0.9));
}

TEST_CASE("gradient flow keeps the constraint and the energy balance") {
  DoubleWell dw(Potential::quartic());
  const double m1 = 0.3, tau = 0.01;
  auto path = ConstraintPath::linear(0.1, 1.0);
  auto q = qs_solve(dw, m1, 0.1, Branch::Minus, Branch::Plus);
  TwoPeaksState init{q.x1, q.x2, m1, 1 - m1, 0};
  TpmOptions opt;
  opt.sample_dt = 0.01;
  auto tr = tpm_integrate(init, dw, tau, path, 0.4, opt);
  REQUIRE_FALSE(tr.halted);
  for (const auto& s : tr.samples) CHECK(m1 * s.x1 + (1 - m1) * s.x2 == doctest::Approx(path.ell(s.t)).epsilon(1e-7).scale(1));
  CHECK(tr.energy_residual < 1e-6);
  for (const auto& s : tr.samples) CHECK(s.D >= 0);
}

TEST_CASE("inconsistent initial data is rejected") {
  DoubleWell dw(Potential::quartic());
  auto path = ConstraintPath::linear(0.0, 1.0);
  CHECK_THROWS_AS(tpm_integrate({-1, 1, 0.3, 0.7, 0}, dw, 0.01, path, 1.0), ValidationError);
  CHECK_THROWS_AS(tpm_integrate({-1, 1, 0.5, 0.6, 0}, dw, 0.01, path, 1.0), ValidationError);
}
