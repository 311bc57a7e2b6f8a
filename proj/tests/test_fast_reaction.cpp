#include <doctest.h>

#include <cmath>

#include "cfp/errors.hpp"
#include "cfp/fast_reaction.hpp"

using namespace cfp;

TEST_CASE("plateau force solves h_-(sigma_b) = b") {
  DoubleWell dw(Potential::quartic());
  for (double b : {0.1, 0.5, 0.9}) {
    double s = sigma_b(dw, b);
    CHECK(barrier_heights(dw, s).h_minus == doctest::Approx(b).epsilon(1e-10));
    CHECK(s > 0);
    CHECK(s < dw.lm().sigma_star);
  }
  CHECK_THROWS_AS(sigma_b(dw, 1.5), DomainError);
}

TEST_CASE("rates are symmetric at zero force and balanced at the plateau") {
  DoubleWell dw(Potential::quartic());
  auto r0 = kramers_rates(dw, 0.0, 0.5, 0.1);
  CHECK(r0.log_r_minus == doctest::Approx(r0.log_r_plus).epsilon(1e-12));
  // at sigma_b the escape from the left well is of order one per unit slow time
  double sb = sigma_b(dw, 0.5);
  auto rb = kramers_rates(dw, sb, 0.5, 0.1);
  CHECK(std::abs(rb.log_r_minus) < 5);
  CHECK(rb.log_r_plus < -20);
  CHECK(flux_general(dw, 0.5, 0.5, 0.0, 0.1) == doctest::Approx(0.0).scale(1e-12));
  CHECK(flux_general(dw, 0.5, 0.5, 0.5, 0.1) > 0);
}

TEST_CASE("near-spinodal flux window and K root") {
  DoubleWell dw(Potential::quartic());
  CHECK(spinodal_gamma(dw) == doctest::Approx(24 / std::sqrt(3.0)).epsilon(1e-10));
  auto far = case2_flux(dw, 0.5, 0.05, 0.5);
  CHECK(far.in_window);
  auto near = case2_flux(dw, dw.lm().sigma_star - 1e-4, 0.05, 0.5);
  CHECK_FALSE(near.in_window);
  CHECK_FALSE(near.warning.empty());
  double K = solve_K(dw, 1e-3, 1e-3);
  CHECK(K > 0);
  CHECK(std::isfinite(K));
}

TEST_CASE("quasi-stationary limit is odd and affine in the masses") {
  DoubleWell dw(Potential::quartic());
  CHECK(qs_psi(dw, 0.0).psi == 0.0);
  const double X = dw.X(Branch::Plus, 0.0);
  auto p = qs_psi(dw, 0.9 * X);
  auto q = qs_psi(dw, -0.9 * X);
  CHECK(p.psi == doctest::Approx(-q.psi).epsilon(1e-12));
  CHECK(p.m_plus == doctest::Approx(0.5 + 0.9 * X / (2 * X)));
  CHECK(p.m_minus + p.m_plus == doctest::Approx(1.0));
}

TEST_CASE("fast-reaction limit holds the plateau between the transfer times") {
  DoubleWell dw(Potential::quartic());
  auto path = ConstraintPath::linear(-1.0, 1.0);
  auto lim = limit_trajectory(dw, 0.5, path, 0.0, 3.0);
  CHECK(lim.sigma_b == doctest::Approx(sigma_b(dw, 0.5)));
  CHECK(path.ell(lim.t1) == doctest::Approx(lim.x_minus));
  CHECK(path.ell(lim.t2) == doctest::Approx(lim.x_plus));
  auto mid = limit_state(dw, lim, path, 0.5 * (lim.t1 + lim.t2));
  CHECK(mid.sigma == doctest::Approx(lim.sigma_b));
  CHECK(mid.m_minus == doctest::Approx(0.5).epsilon(1e-10));
  auto iv = limit_trajectory(dw, 2.0, path, 0.0, 3.0);
  CHECK(iv.sigma_b == 0.0);
}

TEST_CASE("regime classifier rows") {
  DoubleWell dw(Potential::quartic());
  const auto& lm = dw.lm();
  CHECK(classify_regime(std::exp(-150.0), 0.1, lm) == Regime::FastIV);
  CHECK(classify_regime(std::exp(-50.0), 0.1, lm) == Regime::FastKramers);
  CHECK(classify_regime(1e-3, 1e-3, lm) == Regime::FastLimiting);
  CHECK(classify_regime(std::cbrt(1e-6), 1e-6, lm) == Regime::Open);
  const double L = std::log(1e6);
  CHECK(classify_regime(2 / L, 1e-6, lm, 1.0) == Regime::SlowI);
  CHECK(classify_regime(0.5 / L, 1e-6, lm, 1.0) == Regime::SlowII);
  CHECK_THROWS_AS(classify_regime(2 / L, 1e-6, lm), ValidationError);
  CHECK_THROWS(require_limit_model(Regime::Open));
  CHECK_NOTHROW(require_limit_model(Regime::FastKramers));
}

TEST_CASE("constrained Kramers model conserves mass and meets the constraint") {
  DoubleWell dw(Potential::quartic());
  auto path = ConstraintPath::linear(-1.0, 1.0);
  auto s = constrained_kramers_ode(dw, 0.5, 0.15, path, 1.0, 0.0, 3.0);
  REQUIRE(s.size() > 10);
  for (const auto& k : s) {
    CHECK(k.m_minus + k.m_plus == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.m_minus >= 0);
  }
  CHECK(s.front().m_minus == doctest::Approx(1.0));
  CHECK(s.back().m_minus < 1e-3);
}
