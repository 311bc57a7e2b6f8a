#include "cfp/two_peaks.hpp"

#include <array>
#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <sstream>

#include "cfp/csv.hpp"
#include "cfp/errors.hpp"

namespace cfp {

namespace {

template <class F>
double refine_root(F f, double lo, double hi) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  boost::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), it);
  return 0.5 * (r.first + r.second);
}

// first sign change of f when walking from `from` towards `to`; the endpoint `to` is excluded
template <class F>
std::optional<double> first_root(F f, double from, double to, int n = 4000) {
  double prev_s = from;
  double prev = f(from);
  for (int k = 1; k < n; ++k) {
    double s = from + (to - from) * k / n;
    double v = f(s);
    if ((prev > 0) != (v > 0) || v == 0) return refine_root(f, std::min(prev_s, s), std::max(prev_s, s));
    prev = v;
    prev_s = s;
  }
  // close to the excluded endpoint the root may sit inside the last cell
  double s = to - (to - from) * 1e-6;
  double v = f(s);
  if ((prev > 0) != (v > 0)) return refine_root(f, std::min(prev_s, s), std::max(prev_s, s));
  return std::nullopt;
}

double pair_z(const DoubleWell& dw, double m1, Branch b1, Branch b2, double sigma) {
  return m1 * dw.A(b2, sigma) + (1 - m1) * dw.A(b1, sigma);
}

// sigma interval on which m1 X_b1 + m2 X_b2 is monotone
std::pair<double, double> pair_interval(const DoubleWell& dw, double m1, Branch b1, Branch b2) {
  const double ss = dw.lm().sigma_star;
  if (b1 == Branch::Minus && b2 == Branch::Plus) return {-ss, ss};
  if (b1 == Branch::Zero && b2 == Branch::Plus) {
    auto z = [&](double s) { return pair_z(dw, m1, b1, b2, s); };
    auto r = first_root(z, ss, -ss);
    return {r ? *r : -ss, ss};
  }
  if (b1 == Branch::Minus && b2 == Branch::Zero) {
    auto z = [&](double s) { return pair_z(dw, m1, b1, b2, s); };
    auto r = first_root(z, -ss, ss);
    return {-ss, r ? *r : ss};
  }
  throw DomainError(std::string("unsupported branch pair (") + branch_name(b1) + ", " + branch_name(b2) + ")");
}

}  // namespace

QSPoint qs_solve(const DoubleWell& dw, double m1, double ell, Branch b1, Branch b2) {
  if (!(m1 >= 0 && m1 <= 1)) throw DomainError("qs_solve: m1 outside [0,1]");
  const double m2 = 1 - m1;
  QSPoint q;
  q.b1 = b1;
  q.b2 = b2;
  if (m2 == 0 || m1 == 0 || b1 == b2) {
    // a single peak carries the constraint
    q.sigma = dw.dH(ell);
    q.x1 = q.x2 = ell;
    if (m2 == 0 && b2 != b1 && dw.in_domain(b2, q.sigma)) q.x2 = dw.X(b2, q.sigma);
    if (m1 == 0 && b2 != b1 && dw.in_domain(b1, q.sigma)) q.x1 = dw.X(b1, q.sigma);
    return q;
  }
  auto [lo, hi] = pair_interval(dw, m1, b1, b2);
  auto g = [&](double s) { return m1 * dw.X(b1, s) + m2 * dw.X(b2, s) - ell; };
  double glo = g(lo), ghi = g(hi);
  if ((glo > 0) == (ghi > 0) && glo != 0 && ghi != 0) {
    std::ostringstream os;
    os << "no intersection of branch pair (" << branch_name(b1) << ", " << branch_name(b2) << ") with l = " << ell
       << " for m1 = " << m1;
    throw DomainError(os.str());
  }
  q.sigma = refine_root(g, lo, hi);
  q.x1 = dw.X(b1, q.sigma);
  q.x2 = dw.X(b2, q.sigma);
  return q;
}

QSPoint qs_track(const DoubleWell& dw, double m1, double ell) {
  const auto& lm = dw.lm();
  double corner = -m1 * lm.x_star + (1 - m1) * lm.x_starstar;
  if (ell <= corner) return qs_solve(dw, m1, ell, Branch::Minus, Branch::Plus);
  return qs_solve(dw, m1, ell, Branch::Zero, Branch::Plus);
}

double tangency_function(const DoubleWell& dw, double m1, double sigma) {
  return pair_z(dw, m1, Branch::Zero, Branch::Plus, sigma);
}

std::optional<double> tangency(const DoubleWell& dw, double m1) {
  if (!(m1 > 0 && m1 < 1)) return std::nullopt;
  const double ss = dw.lm().sigma_star;
  return first_root([&](double s) { return tangency_function(dw, m1, s); }, ss, -ss);
}

double linear_decay_rate(const DoubleWell& dw, const QSPoint& qs, double m1) {
  return m1 * dw.d2H(qs.x2) + (1 - m1) * dw.d2H(qs.x1);
}

TpmTrajectory tpm_integrate(const TwoPeaksState& init, const DoubleWell& dw, double tau,
                            const ConstraintPath& path, double t_end, const TpmOptions& opt) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 2>;
  if (!(tau > 0)) throw ValidationError("tpm: tau must be positive");
  const double m1 = init.m1, m2 = init.m2;
  if (std::abs(m1 + m2 - 1) > 1e-12 || m1 < 0 || m2 < 0) throw ValidationError("tpm: masses must be nonnegative and sum to 1");
  double c0 = m1 * init.x1 + m2 * init.x2 - path.ell(init.t);
  if (std::abs(c0) > 1e-8) {
    std::ostringstream os;
    os << "tpm: initial state violates the constraint by " << c0;
    throw ValidationError(os.str());
  }

  auto sigma_of = [&](double t, const State& x) {
    return m1 * dw.dH(x[0]) + m2 * dw.dH(x[1]) + tau * path.ell_dot(t);
  };
  auto rhs = [&](const State& x, State& dxdt, double t) {
    double s = sigma_of(t, x);
    dxdt[0] = (s - dw.dH(x[0])) / tau;
    dxdt[1] = (s - dw.dH(x[1])) / tau;
  };
  auto energy = [&](const State& x) { return m1 * dw.H(x[0]) + m2 * dw.H(x[1]); };
  auto diss = [&](double t, const State& x) {
    State v;
    rhs(x, v, t);
    return tau * (m1 * v[0] * v[0] + m2 * v[1] * v[1]);
  };
  auto power = [&](double t, const State& x) { return sigma_of(t, x) * path.ell_dot(t); };

  TpmTrajectory tr;
  auto push_sample = [&](double t, const State& x) {
    tr.samples.push_back({t, x[0], x[1], sigma_of(t, x), energy(x), diss(t, x)});
  };
  auto push_curve = [&](double t, const State& x) {
    State v;
    rhs(x, v, t);
    tr.x1_curve.push(t, x[0], v[0]);
    tr.x2_curve.push(t, x[1], v[1]);
  };

  State x{init.x1, init.x2};
  auto stepper = odeint::make_dense_output(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<State>());
  double t0 = init.t;
  stepper.initialize(x, t0, std::min(1e-3 * tau, (t_end - t0) / 10));
  push_sample(t0, x);
  push_curve(t0, x);
  if (x[1] - x[0] < opt.merge_gap) tr.merge_time = t0;
  double next_sample = opt.sample_dt > 0 ? t0 + opt.sample_dt : 0;
  std::size_t k_sample = 1;

  while (stepper.current_time() < t_end) {
    std::pair<double, double> span;
    try {
      span = stepper.do_step(rhs);
    } catch (const std::exception& e) {
      tr.halted = true;
      tr.halt_time = stepper.current_time();
      tr.halt_reason = std::string("step adjustment failed: ") + e.what();
      break;
    }
    ++tr.steps;
    const double ta = span.first, tb = span.second;
    State xa, xb, xm;
    stepper.calc_state(ta, xa);
    const double tc = std::min(tb, t_end);
    stepper.calc_state(tc, xb);
    stepper.calc_state(0.5 * (ta + tc), xm);
    double h = tc - ta;
    // Simpson for the dissipation and power integrals over the step
    double intD = h / 6 * (diss(ta, xa) + 4 * diss(0.5 * (ta + tc), xm) + diss(tc, xb));
    double intP = h / 6 * (power(ta, xa) + 4 * power(0.5 * (ta + tc), xm) + power(tc, xb));
    tr.energy_residual += std::abs(energy(xb) - energy(xa) + intD - intP);

    if (opt.sample_dt > 0) {
      while (next_sample <= tc + 1e-14) {
        State xs;
        stepper.calc_state(next_sample, xs);
        push_sample(next_sample, xs);
        ++k_sample;
        next_sample = t0 + k_sample * opt.sample_dt;
      }
    } else {
      push_sample(tc, xb);
    }
    if (tc > tr.x1_curve.t_back()) push_curve(tc, xb);
    if (!tr.merge_time && xb[1] - xb[0] < opt.merge_gap) tr.merge_time = tc;

    if (stepper.current_time_step() < opt.min_step && stepper.current_time() < t_end) {
      tr.halted = true;
      tr.halt_time = stepper.current_time();
      std::ostringstream os;
      os << "step size underflow near t = " << tr.halt_time << " (merging event estimate)";
      tr.halt_reason = os.str();
      break;
    }
  }
  return tr;
}

void write_tpm_csv(const std::string& path, const TpmTrajectory& tr) {
  CsvWriter w(path, {"t", "x1", "x2", "sigma", "E", "D"});
  for (const auto& s : tr.samples) {
    w.num(s.t).num(s.x1).num(s.x2).num(s.sigma).num(s.E).num(s.D);
    w.end_row();
  }
}

}  // namespace cfp
