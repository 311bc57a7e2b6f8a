#include "cfp/peak_widening.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/quadrature.hpp"

namespace cfp {

namespace {

using boost::math::quadrature::gauss;

double integrate_f(const PathFn& x1, const Potential& pot, double a, double b) {
  if (a == b) return 0;
  auto f = [&](double s) { return pot.d2(x1(s)); };
  return gk_integrate(f, a, b, 15, 1e-12);
}

// largest |H''| along the path on [a, b], sampled
double max_abs_f(const PathFn& x1, const Potential& pot, double a, double b) {
  double m = 0;
  for (int i = 0; i <= 256; ++i) m = std::max(m, std::abs(pot.d2(x1(a + (b - a) * i / 256))));
  return m;
}

}  // namespace

double phi_of_t(const PathFn& x1_path, const Potential& pot, double t1, double t) {
  return integrate_f(x1_path, pot, t1, t);
}

double log_width_squared(const PathFn& x1_path, const Potential& pot, double tau, double a, double t0, double t1,
                         double t) {
  if (!(tau > 0)) throw DomainError("width: tau must be positive");
  if (!(t > t0)) return -std::numeric_limits<double>::infinity();

  // panels short enough that exp(2 phi / tau) changes by a bounded factor on each
  const double fmax = std::max(max_abs_f(x1_path, pot, t0, t), 1e-12);
  const double len = t - t0;
  const auto panels = static_cast<std::size_t>(std::clamp(std::ceil(len * fmax * 8 / tau), 64.0, 2e6));
  const double h = len / static_cast<double>(panels);

  constexpr unsigned kN = 10;
  const auto& nodes = gauss<double, kN>::abscissa();
  const auto& weights = gauss<double, kN>::weights();
  // abscissa/weights hold the nonnegative half of a symmetric rule
  std::vector<std::pair<double, double>> rule;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    rule.push_back({nodes[i], weights[i]});
    if (nodes[i] != 0) rule.push_back({-nodes[i], weights[i]});
  }
  std::sort(rule.begin(), rule.end());

  double phi_left = phi_of_t(x1_path, pot, t1, t0);
  std::vector<double> log_terms;
  log_terms.reserve(panels * rule.size());
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < panels; ++p) {
    double a0 = t0 + h * static_cast<double>(p), b0 = a0 + h;
    double mid = 0.5 * (a0 + b0), half = 0.5 * h;
    double prev_s = a0, phi_s = phi_left;
    for (auto [z, w] : rule) {
      double s = mid + half * z;
      phi_s += integrate_f(x1_path, pot, prev_s, s);
      prev_s = s;
      double lt = std::log(w * half) + 2 * phi_s / tau;
      log_terms.push_back(lt);
      lmax = std::max(lmax, lt);
    }
    phi_left = phi_s + integrate_f(x1_path, pot, prev_s, b0);
  }
  double acc = 0;
  for (double lt : log_terms) acc += std::exp(lt - lmax);
  double log_int = lmax + std::log(acc);
  double phi_t = phi_left;  // phi at t
  return -std::log(tau) - (2 * phi_t + 2 * a) / tau + log_int;
}

double width_squared(const PathFn& x1_path, const Potential& pot, double tau, double a, double t0, double t1,
                     double t) {
  return std::exp(log_width_squared(x1_path, pot, tau, a, t0, t1, t));
}

WidthState width_state(const PathFn& x1_path, const Potential& pot, double tau, double a, double t0, double t1,
                       double t) {
  return {phi_of_t(x1_path, pot, t1, t), width_squared(x1_path, pot, tau, a, t0, t1, t), t};
}

std::optional<double> splitting_time(const PathFn& x1_path, const DoubleWell& dw, double a, double t1, double t3) {
  if (!(t3 > t1)) return std::nullopt;
  const Potential& pot = dw.pot();
  const int n = 2000;
  double prev_t = t1, prev_phi = 0;
  for (int k = 1; k <= n; ++k) {
    double tk = t1 + (t3 - t1) * k / n;
    double phik = prev_phi + integrate_f(x1_path, pot, prev_t, tk);
    if (phik + a <= 0) {
      auto g = [&](double s) { return prev_phi + integrate_f(x1_path, pot, prev_t, s) + a; };
      double t2;
      double gl = prev_phi + a;
      if (gl == 0) {
        t2 = prev_t;
      } else {
        boost::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(g, prev_t, tk, gl, phik + a,
                                                   boost::math::tools::eps_tolerance<double>(50), it);
        t2 = 0.5 * (r.first + r.second);
      }
      // phi decreases no faster than the largest spinodal curvature allows
      double c = std::abs(dw.d2H(0.0));
      for (int i = 0; i <= 400; ++i) c = std::max(c, -dw.d2H(-dw.lm().x_star + 2 * dw.lm().x_star * i / 400));
      if (t2 - t1 < a / c - 1e-9 * (1 + a)) {
        std::ostringstream os;
        os << "splitting_time: t2 - t1 = " << (t2 - t1) << " below the lower bound a/C = " << a / c;
        throw Error(os.str());
      }
      return t2;
    }
    prev_t = tk;
    prev_phi = phik;
  }
  return std::nullopt;
}

double beta_at(const DoubleWell& dw, double x1) {
  if (std::abs(x1) > dw.lm().x_star) {
    std::ostringstream os;
    os << "not in spinodal region: |x1| = " << std::abs(x1) << " > x_* = " << dw.lm().x_star;
    throw DomainError(os.str());
  }
  return -dw.d2H(x1);
}

}  // namespace cfp
