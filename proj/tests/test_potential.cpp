#include <doctest.h>

#include <cmath>

#include "cfp/errors.hpp"
#include "cfp/potential.hpp"

using namespace cfp;

TEST_CASE("quartic landmarks match closed forms") {
  DoubleWell dw(Potential::quartic());
  const auto& lm = dw.lm();
  CHECK(lm.x_star == doctest::Approx(1 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(lm.sigma_star == doctest::Approx(8 / (3 * std::sqrt(3.0))).epsilon(1e-12));
  CHECK(lm.x_starstar == doctest::Approx(2 / std::sqrt(3.0)).epsilon(1e-10));
  CHECK(lm.h_crit == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("arctan landmarks") {
  DoubleWell dw(Potential::arctan_model());
  const auto& lm = dw.lm();
  CHECK(lm.x_star == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lm.sigma_star == doctest::Approx(M_PI / 2 - 1).epsilon(1e-12));
  CHECK(dw.dH(lm.x_starstar) == doctest::Approx(lm.sigma_star).epsilon(1e-12));
  CHECK(lm.x_starstar == doctest::Approx(3.05).epsilon(1e-2));
}

TEST_CASE("branch inverses solve H'(X) = sigma on their intervals") {
  for (auto pot : {Potential::quartic(), Potential::arctan_model()}) {
    DoubleWell dw(pot);
    const double ss = dw.lm().sigma_star;
    for (double s : {-0.99 * ss, -0.5 * ss, 0.0, 0.3 * ss, 0.99 * ss}) {
      for (Branch b : {Branch::Minus, Branch::Zero, Branch::Plus}) {
        REQUIRE(dw.in_domain(b, s));
        CHECK(dw.dH(dw.X(b, s)) == doctest::Approx(s).epsilon(1e-12).scale(1));
      }
      CHECK(dw.X(Branch::Minus, s) < -dw.lm().x_star);
      CHECK(std::abs(dw.X(Branch::Zero, s)) < dw.lm().x_star);
      CHECK(dw.X(Branch::Plus, s) > dw.lm().x_star);
      CHECK(dw.A(Branch::Zero, s) < 0);
      CHECK(dw.X(Branch::Minus, s) == doctest::Approx(-dw.X(Branch::Plus, -s)).epsilon(1e-12));
    }
    CHECK_FALSE(dw.in_domain(Branch::Minus, 1.01 * ss));
    CHECK_FALSE(dw.in_domain(Branch::Zero, -1.01 * ss));
    CHECK(dw.in_domain(Branch::Plus, 10.0));
  }
}

TEST_CASE("barriers are symmetric at zero force and vanish at the spinodal") {
  DoubleWell dw(Potential::quartic());
  auto h0 = barrier_heights(dw, 0);
  CHECK(h0.h_minus == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h0.h_plus == doctest::Approx(1.0).epsilon(1e-12));
  auto hs = barrier_heights(dw, dw.lm().sigma_star * (1 - 1e-9));
  CHECK(hs.h_minus < 1e-9);
  auto h1 = barrier_heights(dw, 0.5);
  auto h2 = barrier_heights(dw, -0.5);
  CHECK(h1.h_minus == doctest::Approx(h2.h_plus).epsilon(1e-12));
  auto c = curvatures(dw, 0);
  CHECK(c.alpha_minus == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(c.alpha_zero == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("assumption checks accept the shipped wells and reject an odd perturbation") {
  CHECK(verify_assumptions(Potential::quartic(), 2000).ok());
  // X_+ o H' of the arctan well bends upward on (0, x_*)
  auto arc = verify_assumptions(Potential::arctan_model(), 2000);
  CHECK(arc.evenness);
  CHECK(arc.monotone_branches);
  CHECK_FALSE(arc.concavity);
  Potential neg = Potential::quartic().negated();
  CHECK_FALSE(verify_assumptions(neg, 2000).monotone_branches);
  Potential bad = Potential::quartic();
  bad.name = "tilted";
  bad.eval = [](double x) { return (x * x - 1) * (x * x - 1) + 0.1 * x; };
  bad.d1 = [](double x) { return 4 * x * x * x - 4 * x + 0.1; };
  auto rep = verify_assumptions(bad, 2000);
  CHECK_FALSE(rep.evenness);
  CHECK_FALSE(rep.failures.empty());
  CHECK_THROWS_AS(Potential::by_name("cubic"), ValidationError);
}
