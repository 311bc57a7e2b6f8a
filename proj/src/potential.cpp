#include "cfp/potential.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "cfp/errors.hpp"

namespace cfp {

namespace {

constexpr double kResidualTol = 1e-12;

// root of a monotone f on [lo, hi] with sign change
template <class F>
double bracket_root(F f, double lo, double hi) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0)) throw Error("bracket_root: no sign change");
  boost::uintmax_t it = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(52);
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, it);
  return 0.5 * (r.first + r.second);
}

}  // namespace

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::Minus: return "minus";
    case Branch::Zero: return "zero";
    case Branch::Plus: return "plus";
  }
  return "?";
}

Potential Potential::quartic() {
  Potential p;
  p.name = "quartic";
  p.eval = [](double x) { double u = x * x - 1; return u * u; };
  p.d1 = [](double x) { return 4 * x * (x * x - 1); };
  p.d2 = [](double x) { return 12 * x * x - 4; };
  p.d3 = [](double x) { return 24 * x; };
  return p;
}

Potential Potential::arctan_model() {
  Potential p;
  p.name = "arctan";
  p.eval = [](double x) { return 0.5 * x * x - 2 * x * std::atan(x) + std::log1p(x * x); };
  p.d1 = [](double x) { return x - 2 * std::atan(x); };
  p.d2 = [](double x) { return 1 - 2 / (1 + x * x); };
  p.d3 = [](double x) { double q = 1 + x * x; return 4 * x / (q * q); };
  return p;
}

Potential Potential::by_name(const std::string& name) {
  if (name == "quartic") return quartic();
  if (name == "arctan") return arctan_model();
  throw ValidationError("unknown potential '" + name + "' (expected quartic or arctan)");
}

Potential Potential::negated() const {
  Potential p;
  p.name = "-" + name;
  auto e = eval, a = d1, b = d2, c = d3;
  p.eval = [e](double x) { return -e(x); };
  p.d1 = [a](double x) { return -a(x); };
  p.d2 = [b](double x) { return -b(x); };
  p.d3 = [c](double x) { return -c(x); };
  return p;
}

Landmarks landmarks(const Potential& pot, double x_scan) {
  if (!(pot.d2(0.0) < 0)) throw DomainError("not a double-well: H''(0) >= 0");
  bool auto_scan = x_scan <= 0;
  if (auto_scan) x_scan = 1.0;

  const int n_scan = 4000;
  for (int attempt = 0; attempt < 40; ++attempt) {
    // sign changes of H'' on (0, x_scan]
    int changes = 0;
    double bracket_lo = 0, bracket_hi = 0;
    double prev = pot.d2(0.0);
    for (int i = 1; i <= n_scan; ++i) {
      double x = x_scan * i / n_scan;
      double v = pot.d2(x);
      if ((v > 0) != (prev > 0)) {
        if (changes == 0) {
          bracket_lo = x_scan * (i - 1) / n_scan;
          bracket_hi = x;
        }
        ++changes;
      }
      prev = v;
    }
    if (changes > 1) throw DomainError("not a double-well: H'' has more than two sign changes");
    if (changes == 1) {
      Landmarks lm;
      lm.x_star = bracket_root(pot.d2, bracket_lo, bracket_hi);
      lm.sigma_star = -pot.d1(lm.x_star);
      if (!(lm.sigma_star > 0)) throw DomainError("not a double-well: sigma_* <= 0");
      // H' growth beyond the scan bound must exceed sigma_* for x_** to be bracketed
      if (pot.d1(x_scan) > lm.sigma_star) {
        auto g = [&](double x) { return pot.d1(x) - lm.sigma_star; };
        lm.x_starstar = bracket_root(g, lm.x_star, x_scan);
        double x_min = bracket_root(pot.d1, lm.x_star, lm.x_starstar);
        lm.h_crit = pot.eval(0.0) - pot.eval(x_min);
        lm.h_star = pot.eval(lm.x_star) - pot.eval(lm.x_starstar) +
                    lm.sigma_star * (lm.x_star + lm.x_starstar);
        return lm;
      }
    }
    if (!auto_scan) break;
    x_scan *= 2;
  }
  throw DomainError("not a double-well: H'' sign change or H' growth not found on scan interval");
}

DoubleWell::DoubleWell(Potential pot) : pot_(std::move(pot)), lm_(landmarks(pot_)) {}

bool DoubleWell::in_domain(Branch b, double s) const {
  const double ss = lm_.sigma_star;
  switch (b) {
    case Branch::Minus: return s <= ss;
    case Branch::Zero: return s >= -ss && s <= ss;
    case Branch::Plus: return s >= -ss;
  }
  return false;
}

double DoubleWell::X(Branch b, double sigma) const {
  if (!std::isfinite(sigma) || !in_domain(b, sigma)) {
    std::ostringstream os;
    os << "sigma outside branch domain (" << branch_name(b) << ", sigma=" << sigma << ")";
    throw DomainError(os.str());
  }
  const double xs = lm_.x_star, xss = lm_.x_starstar, ss = lm_.sigma_star;
  // exact endpoint identities
  if (sigma == ss) {
    if (b == Branch::Plus) return xss;
    return -xs;
  }
  if (sigma == -ss) {
    if (b == Branch::Minus) return -xss;
    return xs;
  }

  double lo, hi;
  switch (b) {
    case Branch::Zero:
      lo = -xs;
      hi = xs;
      break;
    case Branch::Plus:
      lo = xs;
      hi = xss;
      while (pot_.d1(hi) < sigma) hi = xs + 2 * (hi - xs);
      break;
    case Branch::Minus:
    default:
      hi = -xs;
      lo = -xss;
      while (pot_.d1(lo) > sigma) lo = -xs - 2 * (-xs - lo);
      break;
  }
  auto f = [&](double x) { return std::make_tuple(pot_.d1(x) - sigma, pot_.d2(x)); };
  double guess = 0.5 * (lo + hi);
  boost::uintmax_t it = 200;
  double x = boost::math::tools::newton_raphson_iterate(f, guess, lo, hi, 50, it);

  if (std::abs(pot_.d1(x) - sigma) > kResidualTol) {
    // flat derivative near a branch endpoint: polish on the bracket
    x = bracket_root([&](double y) { return pot_.d1(y) - sigma; }, lo, hi);
  }
  return x;
}

double branch_inverse(const DoubleWell& dw, Branch b, double sigma) { return dw.X(b, sigma); }

namespace {
void require_inner(const DoubleWell& dw, double sigma) {
  if (!(std::abs(sigma) <= dw.lm().sigma_star)) {
    std::ostringstream os;
    os << "domain violation: |sigma| = " << std::abs(sigma) << " exceeds sigma_* = " << dw.lm().sigma_star;
    throw DomainError(os.str());
  }
}
}  // namespace

BarrierHeights barrier_heights(const DoubleWell& dw, double sigma) {
  require_inner(dw, sigma);
  auto Hs = [&](double x) { return dw.H(x) - sigma * x; };
  double x0 = dw.X(Branch::Zero, sigma);
  return {Hs(x0) - Hs(dw.X(Branch::Minus, sigma)), Hs(x0) - Hs(dw.X(Branch::Plus, sigma))};
}

Curvatures curvatures(const DoubleWell& dw, double sigma) {
  require_inner(dw, sigma);
  return {std::abs(dw.A(Branch::Minus, sigma)), std::abs(dw.A(Branch::Zero, sigma)),
          std::abs(dw.A(Branch::Plus, sigma))};
}

AssumptionReport verify_assumptions(const Potential& pot, int n_samples) {
  AssumptionReport rep;
  if (n_samples < 8) n_samples = 8;

  Landmarks lm;
  bool have_lm = true;
  try {
    lm = landmarks(pot);
  } catch (const DomainError& e) {
    have_lm = false;
    rep.failures.push_back(std::string("A2: ") + e.what());
  }
  const double X = have_lm ? 2 * lm.x_starstar : 3.0;

  rep.evenness = true;
  for (int i = 0; i <= n_samples; ++i) {
    double x = X * i / n_samples;
    double a = pot.eval(x), b = pot.eval(-x);
    if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
      rep.evenness = false;
      rep.failures.push_back("A1: H(x) != H(-x) at x=" + std::to_string(x));
      break;
    }
  }

  if (have_lm) {
    rep.monotone_branches = true;
    // H' sampled on each branch interval must be strictly monotone with the expected sign
    auto check = [&](double a, double b, int sign, const char* what) {
      double prev = pot.d1(a);
      for (int i = 1; i <= n_samples; ++i) {
        double x = a + (b - a) * i / n_samples;
        double v = pot.d1(x);
        if (!((v - prev) * sign > 0)) {
          rep.monotone_branches = false;
          rep.failures.push_back(std::string("A2: H' not monotone on ") + what);
          return;
        }
        prev = v;
      }
    };
    const double eps = 1e-9 * lm.x_star;
    check(-X, -lm.x_star - eps, +1, "(-inf, -x_*)");
    check(-lm.x_star + eps, lm.x_star - eps, -1, "(-x_*, x_*)");
    check(lm.x_star + eps, X, +1, "(x_*, inf)");
  }

  if (have_lm && rep.monotone_branches) {
    DoubleWell dw(pot);
    rep.concavity = true;
    // for even H, X_- o H' is the point reflection of X_+ o H', so the minus side is checked for convexity
    const double h = 2 * lm.x_star / n_samples;
    for (int i = 1; i < n_samples; ++i) {
      double x = -lm.x_star + i * h;
      if (x - h <= -lm.x_star || x + h >= lm.x_star) continue;
      auto gp = [&](double y) { return dw.X(Branch::Plus, pot.d1(y)); };
      auto gm = [&](double y) { return dw.X(Branch::Minus, pot.d1(y)); };
      double dp = 0, dm = 0;
      try {
        dp = gp(x - h) - 2 * gp(x) + gp(x + h);
        dm = gm(x - h) - 2 * gm(x) + gm(x + h);
      } catch (const DomainError& e) {
        rep.concavity = false;
        rep.failures.push_back(std::string("A3: ") + e.what());
        break;
      }
      if (dp > 1e-10 || dm < -1e-10) {
        rep.concavity = false;
        rep.failures.push_back("A3: branch composition fails concavity at x=" + std::to_string(x));
        break;
      }
    }
  } else if (have_lm) {
    rep.failures.push_back("A3: not checked (A2 failed)");
  } else {
    rep.failures.push_back("A3: not checked (no landmarks)");
  }
  return rep;
}

}  // namespace cfp
