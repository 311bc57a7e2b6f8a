#include "cfp/fast_reaction.hpp"

#include <algorithm>
#include <array>
#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "cfp/csv.hpp"
#include "cfp/errors.hpp"

namespace cfp {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <class F>
double root(F f, double lo, double hi) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0)) throw Error("fast reaction: root not bracketed");
  boost::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), it);
  return 0.5 * (r.first + r.second);
}

// first time in [t0, t_end] with l(t) = target for increasing paths
double crossing_time(const ConstraintPath& path, double target, double t0, double t_end) {
  const int n = 2000;
  double prev_t = t0, prev = path.ell(t0) - target;
  if (prev >= 0) return t0;
  for (int k = 1; k <= n; ++k) {
    double t = t0 + (t_end - t0) * k / n;
    double v = path.ell(t) - target;
    if (v >= 0) return root([&](double s) { return path.ell(s) - target; }, prev_t, t);
    prev_t = t;
    prev = v;
  }
  return std::numeric_limits<double>::infinity();
}

double H_sigma(const DoubleWell& dw, double sigma, double x) { return dw.H(x) - sigma * x; }

}  // namespace

double sigma_b(const DoubleWell& dw, double b) {
  const auto& lm = dw.lm();
  if (!(b > 0 && b < lm.h_crit)) {
    std::ostringstream os;
    os << "b out of (0,h_crit): b = " << b << ", h_crit = " << lm.h_crit;
    throw DomainError(os.str());
  }
  return root([&](double s) { return barrier_heights(dw, s).h_minus - b; }, 0.0, lm.sigma_star);
}

Rates kramers_rates(const DoubleWell& dw, double sigma, double b, double nu) {
  if (!(std::abs(sigma) < dw.lm().sigma_star)) throw DomainError("kramers_rates: |sigma| must be below sigma_*");
  auto h = barrier_heights(dw, sigma);
  auto c = curvatures(dw, sigma);
  Rates r;
  const double nu2 = nu * nu;
  r.log_r_minus = 0.5 * std::log(c.alpha_minus * c.alpha_zero) - std::log(2 * kPi) + (b - h.h_minus) / nu2;
  r.log_r_plus = 0.5 * std::log(c.alpha_plus * c.alpha_zero) - std::log(2 * kPi) + (b - h.h_plus) / nu2;
  r.r_minus = std::exp(r.log_r_minus);
  r.r_plus = std::exp(r.log_r_plus);
  return r;
}

double flux_general(const DoubleWell& dw, double m_minus, double m_plus, double sigma, double nu) {
  // rates with b = 0 are the fluxes per unit mass in fast time
  Rates r = kramers_rates(dw, sigma, 0.0, nu);
  return m_minus * r.r_minus - m_plus * r.r_plus;
}

double spinodal_gamma(const DoubleWell& dw) { return -dw.d3H(-dw.lm().x_star); }

namespace {
double case2_prefactor(double gamma) { return std::sqrt(gamma / 2) / kPi; }
double case2_exponent(double gamma) { return 4 * std::sqrt(2.0) / (3 * std::sqrt(gamma)); }
}  // namespace

Case2Flux case2_flux(const DoubleWell& dw, double sigma, double nu, double m_minus) {
  const double d = dw.lm().sigma_star - sigma;
  if (!(d > 0)) throw DomainError("case2_flux: sigma must lie below sigma_*");
  const double g = spinodal_gamma(dw);
  Case2Flux f;
  f.window = std::pow(d, 1.5) / (nu * nu);
  f.R = m_minus * case2_prefactor(g) * std::sqrt(d) * std::exp(-case2_exponent(g) * f.window);
  f.in_window = f.window >= 5;
  if (!f.in_window) {
    std::ostringstream os;
    os << "case-2 asymptotics outside validity window: (sigma_*-sigma)^1.5/nu^2 = " << f.window << " < 5";
    f.warning = os.str();
  }
  return f;
}

double solve_K(const DoubleWell& dw, double tau, double nu) {
  const double g = spinodal_gamma(dw);
  const double P = case2_prefactor(g), c = case2_exponent(g);
  const double target = std::log(tau) - (2.0 / 3.0) * std::log(nu);
  auto logf = [&](double K) { return std::log(P * K) - c * K * K * K; };
  const double Kp = std::cbrt(1 / (3 * c));
  if (logf(Kp) <= target) throw DomainError("solve_K: tau nu^{-2/3} exceeds the maximum of the K relation");
  double hi = 2 * Kp;
  while (logf(hi) > target) hi *= 2;
  return root([&](double K) { return logf(K) - target; }, Kp, hi);
}

std::vector<KramersSample> constrained_kramers_ode(const DoubleWell& dw, double b, double nu,
                                                   const ConstraintPath& path, double m0, double t0, double t_end,
                                                   const KramersOptions& opt) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 1>;
  if (!(m0 >= 0 && m0 <= 1)) throw ValidationError("kramers: m0 must lie in [0,1]");
  if (!(nu > 0)) throw ValidationError("kramers: nu must be positive");
  const double sb = sigma_b(dw, b);
  const double ss = dw.lm().sigma_star;

  auto sigma_of = [&](double m, double ell) {
    if (m >= 1) {
      if (ell > -dw.lm().x_star) throw Error("constraint unsolvable: left peak cannot reach l = " + std::to_string(ell));
      return dw.dH(ell);
    }
    if (m <= 0) {
      if (ell < dw.lm().x_star) throw Error("constraint unsolvable: right peak cannot reach l = " + std::to_string(ell));
      return dw.dH(ell);
    }
    auto g = [&](double s) { return m * dw.X(Branch::Minus, s) + (1 - m) * dw.X(Branch::Plus, s) - ell; };
    if (g(-ss) > 0 || g(ss) < 0) {
      std::ostringstream os;
      os << "constraint unsolvable: l = " << ell << " outside the two-peak range for m_minus = " << m;
      throw Error(os.str());
    }
    return root(g, -ss, ss);
  };
  // trial states of the implicit stepper may leave the feasible mass range; there sigma saturates
  // just inside the spinodal force, which drives m back towards feasibility
  const double s_edge = ss * (1 - 1e-12);
  auto sigma_relaxed = [&](double m, double ell) {
    auto g = [&](double s) {
      double v = -ell;
      if (m > 0) v += m * dw.X(Branch::Minus, s);
      if (m < 1) v += (1 - m) * dw.X(Branch::Plus, s);
      return v;
    };
    if (g(-s_edge) >= 0) return -s_edge;
    if (g(s_edge) <= 0) return s_edge;
    return root(g, -s_edge, s_edge);
  };
  auto flow = [&](double m, double t) {
    m = std::clamp(m, 0.0, 1.0);
    double s = sigma_relaxed(m, path.ell(t));
    Rates r = kramers_rates(dw, s, b, nu);
    return -(m * r.r_minus - (1 - m) * r.r_plus);
  };
  auto rhs = [&](const State& x, State& dxdt, double t) { dxdt[0] = flow(x[0], t); };

  std::vector<KramersSample> out;
  auto record = [&](double t, double m) {
    m = std::clamp(m, 0.0, 1.0);
    double ell = path.ell(t);
    double s = sigma_of(m, ell);
    double E = 0;
    if (m > 0) E += m * dw.H(dw.X(Branch::Minus, s));
    if (m < 1) E += (1 - m) * dw.H(dw.X(Branch::Plus, s));
    out.push_back({t, ell, s, (s - sb) / (nu * nu), m, 1 - m, E});
  };

  State x{m0};
  sigma_of(m0, path.ell(t0));
  auto stepper = odeint::make_dense_output(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<State>());
  stepper.initialize(x, t0, opt.first_step);
  record(t0, m0);
  std::size_t k = 1;
  double next = t0 + opt.sample_dt;
  bool dropped = false;
  while (stepper.current_time() < t_end) {
    stepper.do_step(rhs);
    const double tc = std::min(stepper.current_time(), t_end);
    while (next <= tc + 1e-14) {
      State xs;
      stepper.calc_state(next, xs);
      record(next, xs[0]);
      next = t0 + static_cast<double>(++k) * opt.sample_dt;
    }
    if (stepper.current_state()[0] < opt.m_min) {
      dropped = true;
      break;
    }
  }
  if (dropped) {
    for (; next <= t_end + 1e-14; next = t0 + static_cast<double>(++k) * opt.sample_dt) record(next, 0.0);
  }
  return out;
}

double dissipation_b(const DoubleWell& dw, double sb) {
  double xm = dw.X(Branch::Minus, sb), xp = dw.X(Branch::Plus, sb);
  return (H_sigma(dw, sb, xm) - H_sigma(dw, sb, xp)) / (xp - xm);
}

FastLimit limit_trajectory_at(const DoubleWell& dw, double sb, const ConstraintPath& path, double t0,
                              double t_end) {
  if (!(sb >= 0 && sb <= dw.lm().sigma_star)) throw DomainError("limit_trajectory: sigma_b outside [0, sigma_*]");
  FastLimit lim;
  lim.sigma_b = sb;
  lim.x_minus = dw.X(Branch::Minus, sb);
  lim.x_plus = dw.X(Branch::Plus, sb);
  lim.t1 = crossing_time(path, lim.x_minus, t0, t_end);
  lim.t2 = crossing_time(path, lim.x_plus, t0, t_end);
  lim.D_b = dissipation_b(dw, sb);
  return lim;
}

FastLimit limit_trajectory(const DoubleWell& dw, double b, const ConstraintPath& path, double t0, double t_end) {
  if (!(b > 0)) throw DomainError("b out of (0,h_crit): b must be positive");
  double sb = b >= dw.lm().h_crit ? 0.0 : sigma_b(dw, b);
  return limit_trajectory_at(dw, sb, path, t0, t_end);
}

FastLimitState limit_state(const DoubleWell& dw, const FastLimit& lim, const ConstraintPath& path, double t) {
  const double ell = path.ell(t);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  FastLimitState s{};
  if (t < lim.t1) {
    s.sigma = dw.dH(ell);
    s.m_minus = 1;
    s.m_plus = 0;
    s.x_minus = ell;
    s.x_plus = dw.in_domain(Branch::Plus, s.sigma) ? dw.X(Branch::Plus, s.sigma) : nan;
    s.E = dw.H(ell);
  } else if (t <= lim.t2) {
    s.sigma = lim.sigma_b;
    s.x_minus = lim.x_minus;
    s.x_plus = lim.x_plus;
    s.m_minus = std::clamp((lim.x_plus - ell) / (lim.x_plus - lim.x_minus), 0.0, 1.0);
    s.m_plus = 1 - s.m_minus;
    s.E = s.m_minus * dw.H(s.x_minus) + s.m_plus * dw.H(s.x_plus);
  } else {
    s.sigma = dw.dH(ell);
    s.m_minus = 0;
    s.m_plus = 1;
    s.x_plus = ell;
    s.x_minus = dw.in_domain(Branch::Minus, s.sigma) ? dw.X(Branch::Minus, s.sigma) : nan;
    s.E = dw.H(ell);
  }
  return s;
}

QsPsi qs_psi(const DoubleWell& dw, double ell) {
  const double X = dw.X(Branch::Plus, 0.0);
  if (!(std::abs(ell) < X)) {
    std::ostringstream os;
    os << "domain violation: |l| = " << std::abs(ell) << " must be below X+(0) = " << X;
    throw DomainError(os.str());
  }
  // written as a difference of logs so that psi(-l) = -psi(l) holds exactly
  return {(std::log(X + ell) - std::log(X - ell)) / (2 * X), (X - ell) / (2 * X), (X + ell) / (2 * X)};
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::SlowI: return "slow-I";
    case Regime::SlowII: return "slow-II";
    case Regime::Open: return "OPEN";
    case Regime::FastLimiting: return "fast-III-limiting";
    case Regime::FastKramers: return "fast-III-Kramers";
    case Regime::FastIV: return "fast-IV";
  }
  return "?";
}

Regime classify_regime(double tau, double nu, const Landmarks& lm, std::optional<double> a_crit) {
  if (!(tau > 0 && tau < 1 && nu > 0 && nu < 1)) throw ValidationError("classify: need 0 < tau, nu < 1");
  const double lam = std::log(1 / tau);  // tau = exp(-lam)
  const double L = std::log(1 / nu);     // nu = exp(-L)
  const double b = nu * nu * lam;        // tau = exp(-b / nu^2)
  if (b >= lm.h_crit) return Regime::FastIV;
  // exponential scalings lam ~ 1/nu^2 dominate L^2; power laws give lam = p L; slow scalings give lam ~ ln L
  if (lam >= L * L) return Regime::FastKramers;
  if (lam >= 2 * L / 3) return Regime::FastLimiting;
  if (lam > std::sqrt(L)) return Regime::Open;
  if (!a_crit) throw ValidationError("classify: a_crit is required to separate slow-I from slow-II");
  return tau * L > *a_crit ? Regime::SlowI : Regime::SlowII;
}

void require_limit_model(Regime r) {
  if (r == Regime::Open) throw DomainError("OPEN regime (tau = nu^p, 0 < p < 2/3): no limit model is available");
}

void write_kramers_csv(const std::string& path, const std::vector<KramersSample>& s) {
  CsvWriter w(path, {"t", "ell", "sigma", "psi", "m_minus", "m_plus", "E"});
  for (const auto& k : s) {
    w.num(k.t).num(k.ell).num(k.sigma).num(k.psi).num(k.m_minus).num(k.m_plus).num(k.E);
    w.end_row();
  }
}

}  // namespace cfp
