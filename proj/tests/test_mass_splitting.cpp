#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cfp/errors.hpp"
#include "cfp/mass_splitting.hpp"

using namespace cfp;

TEST_CASE("initial ensemble is centred on the unstable branch and meets the constraint") {
  DoubleWell dw(Potential::quartic());
  auto e = init_ensemble(dw, 0.4, 0.2, 200, 1e-3);
  REQUIRE(e.xi.size() == 200);
  double mean = 0;
  for (double x : e.xi) mean += x / 200;
  CHECK(mean == doctest::Approx(dw.X(Branch::Zero, 0.2)).epsilon(1e-9));
  CHECK(e.x2 == doctest::Approx(dw.X(Branch::Plus, 0.2)));
  CHECK(e.ell == doctest::Approx(0.4 * mean + 0.6 * e.x2).epsilon(1e-12));
  auto l = init_ensemble(dw, 0.4, 0.2, 200, 1e-3, PartnerSide::Left);
  CHECK(l.x2 == doctest::Approx(dw.X(Branch::Minus, 0.2)));
}

TEST_CASE("characteristic step preserves the constraint") {
  DoubleWell dw(Potential::quartic());
  auto e = init_ensemble(dw, 0.5, -0.3, 100, 1e-2);
  auto f = e;
  for (int k = 0; k < 50; ++k) msm_step_inplace(f, dw.pot(), 1e-3);
  double l = 0;
  for (double x : f.xi) l += f.m1 / 100 * x;
  l += f.m2 * f.x2;
  CHECK(l == doctest::Approx(e.ell).epsilon(1e-12));
  auto g = msm_step(e, dw.pot(), 1e-3);
  CHECK(g.s == doctest::Approx(e.s + 1e-3));
}

TEST_CASE("lone unstable peak at zero force splits in half") {
  DoubleWell dw(Potential::quartic());
  auto r = run_split(dw, 1.0, 0.0, 1000, 1e-3);
  REQUIRE(r.converged);
  CHECK(r.m12 == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(r.m_right == doctest::Approx(r.m12));
  CHECK(r.constraint_drift < 1e-10);
  CHECK(std::abs(r.sigma_hat) < 1e-6);
}

TEST_CASE("table interpolation is exact at nodes and round-trips through CSV") {
  DoubleWell dw(Potential::quartic());
  auto t = tabulate_M(dw, {0.5, 1.0}, {-0.4, 0.0, 0.4}, 200, 1e-3, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(t.interpolate(t.m1_grid()[i], t.sigma_grid()[j]) == doctest::Approx(t.at(i, j).result.m12));
  // below the first m1 node the mass scales to zero
  CHECK(t.interpolate(0.25, 0.0) == doctest::Approx(0.5 * t.at(0, 1).result.m12));
  auto p = std::filesystem::temp_directory_path() / "cfp_mtable_test.csv";
  t.write_csv(p.string());
  auto u = MTable::read_csv(p.string());
  std::filesystem::remove(p);
  CHECK(u.interpolate(0.8, 0.1) == t.interpolate(0.8, 0.1));
  CHECK_THROWS(t.interpolate(0.8, 2.0));
}

TEST_CASE("linspace endpoints") {
  auto v = linspace(0, 1, 5);
  REQUIRE(v.size() == 5);
  CHECK(v.front() == 0);
  CHECK(v.back() == 1);
  CHECK(v[2] == doctest::Approx(0.5));
}
