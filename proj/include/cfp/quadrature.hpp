#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace cfp {

// Boost's adaptive Gauss-Kronrod compares an error estimate taken on [-1, 1] with a tolerance
// scaled by the interval length, so short intervals refine to max_depth. Mapping every
// interval onto [0, 1] keeps the relative tolerance meaningful.
template <class F>
double gk_integrate(F f, double a, double b, unsigned max_depth, double tol) {
  if (a == b) return 0;
  const double len = b - a;
  auto g = [&](double u) { return f(a + len * u); };
  return len * boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, 0.0, 1.0, max_depth, tol);
}

}  // namespace cfp
