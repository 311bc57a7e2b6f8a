#include "cfp/limit_dynamics.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "cfp/csv.hpp"
#include "cfp/errors.hpp"
#include "cfp/quadrature.hpp"

namespace cfp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
double solve_bracket(F f, double lo, double hi, double tol = 0) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0)) throw Error("limit dynamics: root not bracketed");
  boost::uintmax_t it = 200;
  std::pair<double, double> r;
  if (tol > 0) {
    auto stop = [tol](double a, double b) { return std::abs(b - a) <= tol; };
    r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, stop, it);
  } else {
    r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), it);
  }
  return 0.5 * (r.first + r.second);
}

// first sign change of f walking from `from` towards `to`, endpoint excluded
template <class F>
std::optional<double> first_sign_change(F f, double from, double to, int n = 4000) {
  double ps = from, pv = f(from);
  for (int k = 1; k < n; ++k) {
    double s = from + (to - from) * k / n;
    double v = f(s);
    if ((pv > 0) != (v > 0) || v == 0) return solve_bracket(f, std::min(ps, s), std::max(ps, s));
    ps = s;
    pv = v;
  }
  double s = to - (to - from) * 1e-6;
  double v = f(s);
  if ((pv > 0) != (v > 0)) return solve_bracket(f, std::min(ps, s), std::max(ps, s));
  return std::nullopt;
}

bool two_peaks(Configuration c) {
  return c == Configuration::T_minus_plus || c == Configuration::T_minus_zero || c == Configuration::T_zero_plus;
}

double Zm0(const DoubleWell& dw, double mm, double m0, double s) {
  return mm * dw.A(Branch::Zero, s) + m0 * dw.A(Branch::Minus, s);
}
double Z0p(const DoubleWell& dw, double m0, double mp, double s) {
  return m0 * dw.A(Branch::Plus, s) + mp * dw.A(Branch::Zero, s);
}

struct Exit {
  EventKind kind;
  double sigma;  // force on the boundary
};

// regular segment of a configuration with frozen masses: sigma <-> l and the two l-boundaries
struct Segment {
  const DoubleWell* dw;
  Configuration c;
  double mm, m0, mp;
  double s_lo = -kInf, s_hi = kInf;
  double l_lo = -kInf, l_hi = kInf;
  std::optional<Exit> exit_lo, exit_hi;

  double G(double s) const {
    double l = 0;
    if (mm > 0) l += mm * dw->X(Branch::Minus, s);
    if (m0 > 0) l += m0 * dw->X(Branch::Zero, s);
    if (mp > 0) l += mp * dw->X(Branch::Plus, s);
    return l;
  }

  double sigma(double ell) const {
    if (!two_peaks(c)) {
      double l = std::clamp(ell, l_lo, l_hi);
      return dw->dH(l);
    }
    if (ell <= l_lo) return c == Configuration::T_minus_plus ? s_lo : s_hi;
    if (ell >= l_hi) return c == Configuration::T_minus_plus ? s_hi : s_lo;
    return solve_bracket([&](double s) { return G(s) - ell; }, s_lo, s_hi);
  }
};

Segment make_segment(const DoubleWell& dw, const LimitState& st) {
  const auto& lm = dw.lm();
  const double ss = lm.sigma_star, xs = lm.x_star;
  Segment g;
  g.dw = &dw;
  g.c = st.config;
  g.mm = st.m_minus;
  g.m0 = st.m_zero;
  g.mp = st.m_plus;
  auto s0_exit = [&](int side) {
    // leaving the spinodal through the side it came in is inverse switching, otherwise trivial merging
    return st.entry == side ? EventKind::InverseSwitching : EventKind::MergingContinuous;
  };
  switch (st.config) {
    case Configuration::S_minus:
      g.s_hi = ss;
      g.l_hi = -xs;
      g.exit_hi = Exit{EventKind::Switching, ss};
      break;
    case Configuration::S_plus:
      g.s_lo = -ss;
      g.l_lo = xs;
      g.exit_lo = Exit{EventKind::Switching, -ss};
      break;
    case Configuration::S_zero:
      g.s_lo = -ss;
      g.s_hi = ss;
      g.l_lo = -xs;
      g.l_hi = xs;
      g.exit_lo = Exit{s0_exit(+1), ss};
      g.exit_hi = Exit{s0_exit(-1), -ss};
      break;
    case Configuration::T_minus_plus:
      g.s_lo = -ss;
      g.s_hi = ss;
      g.l_lo = g.G(-ss);
      g.l_hi = g.G(ss);
      g.exit_lo = Exit{EventKind::Switching, -ss};
      g.exit_hi = Exit{EventKind::Switching, ss};
      break;
    case Configuration::T_zero_plus: {
      auto r = first_sign_change([&](double s) { return Z0p(dw, g.m0, g.mp, s); }, ss, -ss);
      g.s_lo = r ? *r : -ss;
      g.s_hi = ss;
      g.l_lo = g.G(ss);
      g.l_hi = g.G(g.s_lo);
      g.exit_lo = Exit{EventKind::InverseSwitching, ss};
      g.exit_hi = Exit{r ? EventKind::MergingDiscontinuous : EventKind::MergingContinuous, g.s_lo};
      break;
    }
    case Configuration::T_minus_zero: {
      auto r = first_sign_change([&](double s) { return Zm0(dw, g.mm, g.m0, s); }, -ss, ss);
      g.s_lo = -ss;
      g.s_hi = r ? *r : ss;
      g.l_lo = g.G(g.s_hi);
      g.l_hi = g.G(-ss);
      g.exit_lo = Exit{r ? EventKind::MergingDiscontinuous : EventKind::MergingContinuous, g.s_hi};
      g.exit_hi = Exit{EventKind::InverseSwitching, -ss};
      break;
    }
  }
  return g;
}

int priority(EventKind k) {
  switch (k) {
    case EventKind::Splitting: return 0;
    case EventKind::MergingContinuous:
    case EventKind::MergingDiscontinuous: return 1;
    default: return 2;
  }
}

Configuration config_from_masses(double mm, double m0, double mp) {
  if (m0 == 0) {
    if (mp == 0) return Configuration::S_minus;
    if (mm == 0) return Configuration::S_plus;
    return Configuration::T_minus_plus;
  }
  if (mm == 0 && mp == 0) return Configuration::S_zero;
  return mm > 0 ? Configuration::T_minus_zero : Configuration::T_zero_plus;
}

LimitState settle(const DoubleWell& dw, LimitState s, double ell) {
  s.config = config_from_masses(s.m_minus, s.m_zero, s.m_plus);
  s.sigma = make_segment(dw, s).sigma(ell);
  return s;
}

}  // namespace

const char* config_name(Configuration c) {
  switch (c) {
    case Configuration::S_minus: return "S_minus";
    case Configuration::S_zero: return "S_zero";
    case Configuration::S_plus: return "S_plus";
    case Configuration::T_minus_plus: return "T_minus_plus";
    case Configuration::T_minus_zero: return "T_minus_zero";
    case Configuration::T_zero_plus: return "T_zero_plus";
  }
  return "?";
}

const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::Switching: return "Switching";
    case EventKind::InverseSwitching: return "InverseSwitching";
    case EventKind::Splitting: return "Splitting";
    case EventKind::MergingContinuous: return "MergingContinuous";
    case EventKind::MergingDiscontinuous: return "MergingDiscontinuous";
  }
  return "?";
}

bool is_merging(EventKind k) { return k == EventKind::MergingContinuous || k == EventKind::MergingDiscontinuous; }

MProvider live_M(const DoubleWell& dw, std::size_t N, double eps, MsmOptions opt) {
  return [&dw, N, eps, opt](double m1, double sigma) {
    if (m1 <= 0) return 0.0;
    return run_split(dw, std::min(m1, 1.0), sigma, N, eps, opt.s_max, opt).m12;
  };
}

MProvider table_M(std::shared_ptr<const MTable> table) {
  return [table](double m1, double sigma) {
    if (m1 <= 0) return 0.0;
    return table->interpolate(std::min(m1, 1.0), sigma);
  };
}

double state_ell(const DoubleWell& dw, const LimitState& s) {
  double l = 0;
  if (s.m_minus > 0) l += s.m_minus * dw.X(Branch::Minus, s.sigma);
  if (s.m_zero > 0) l += s.m_zero * dw.X(Branch::Zero, s.sigma);
  if (s.m_plus > 0) l += s.m_plus * dw.X(Branch::Plus, s.sigma);
  return l;
}

double state_energy(const DoubleWell& dw, const LimitState& s) {
  double e = 0;
  if (s.m_minus > 0) e += s.m_minus * dw.H(dw.X(Branch::Minus, s.sigma));
  if (s.m_zero > 0) e += s.m_zero * dw.H(dw.X(Branch::Zero, s.sigma));
  if (s.m_plus > 0) e += s.m_plus * dw.H(dw.X(Branch::Plus, s.sigma));
  return e;
}

void validate_state(const DoubleWell& dw, const LimitState& s, double a) {
  auto fail = [&](const std::string& why) {
    throw DomainError(std::string("invalid limit state (") + config_name(s.config) + "): " + why);
  };
  if (s.m_minus < 0 || s.m_zero < 0 || s.m_plus < 0) fail("negative mass");
  if (std::abs(s.m_minus + s.m_zero + s.m_plus - 1) > 1e-12) fail("masses do not sum to 1");
  if (s.m_minus * s.m_zero * s.m_plus != 0) fail("three positive masses");
  if (config_from_masses(s.m_minus, s.m_zero, s.m_plus) != s.config) fail("mass pattern does not match");
  const double ss = dw.lm().sigma_star, tol = 1e-9;
  switch (s.config) {
    case Configuration::S_minus:
      if (s.sigma > ss + tol) fail("sigma above sigma_*");
      break;
    case Configuration::S_plus:
      if (s.sigma < -ss - tol) fail("sigma below -sigma_*");
      break;
    default:
      if (std::abs(s.sigma) > ss + tol) fail("|sigma| above sigma_*");
  }
  if (s.m_zero > 0) {
    if (s.phi > tol || s.phi < -a - tol) fail("phi outside [-a, 0]");
  } else if (s.phi != 0) {
    fail("phi must vanish without an unstable peak");
  }
  if (s.config == Configuration::T_zero_plus && Z0p(dw, s.m_zero, s.m_plus, s.sigma) < -tol) fail("Z_0+ negative");
  if (s.config == Configuration::T_minus_zero && Zm0(dw, s.m_minus, s.m_zero, s.sigma) < -tol) fail("Z_-0 negative");
}

LimitRhs regular_rhs(const DoubleWell& dw, const LimitState& s, double ell_dot) {
  const double ss = dw.lm().sigma_star;
  LimitRhs r;
  auto A = [&](Branch b) { return dw.A(b, s.sigma); };
  switch (s.config) {
    case Configuration::S_minus:
      if (s.sigma >= ss) throw DomainError("at event boundary");
      r.dsigma = ell_dot * A(Branch::Minus);
      break;
    case Configuration::S_plus:
      if (s.sigma <= -ss) throw DomainError("at event boundary");
      r.dsigma = ell_dot * A(Branch::Plus);
      break;
    case Configuration::S_zero:
      if (std::abs(s.sigma) >= ss) throw DomainError("at event boundary");
      r.dsigma = ell_dot * A(Branch::Zero);
      break;
    case Configuration::T_minus_plus: {
      if (std::abs(s.sigma) >= ss) throw DomainError("at event boundary");
      double am = A(Branch::Minus), ap = A(Branch::Plus);
      r.dsigma = ell_dot * am * ap / (s.m_minus * ap + s.m_plus * am);
      break;
    }
    case Configuration::T_zero_plus: {
      double z = Z0p(dw, s.m_zero, s.m_plus, s.sigma);
      if (std::abs(s.sigma) >= ss || z <= 0) throw DomainError("at event boundary");
      r.dsigma = ell_dot * A(Branch::Zero) * A(Branch::Plus) / z;
      break;
    }
    case Configuration::T_minus_zero: {
      double z = Zm0(dw, s.m_minus, s.m_zero, s.sigma);
      if (std::abs(s.sigma) >= ss || z <= 0) throw DomainError("at event boundary");
      r.dsigma = ell_dot * A(Branch::Minus) * A(Branch::Zero) / z;
      break;
    }
  }
  if (s.m_zero > 0) r.dphi = A(Branch::Zero);
  return r;
}

std::optional<EventKind> detect_event(const DoubleWell& dw, const LimitState& s, double a, double ell_dot,
                                      double tol) {
  if (s.m_zero > 0 && s.phi <= -a + tol) return EventKind::Splitting;
  Segment g = make_segment(dw, s);
  std::optional<EventKind> best;
  auto consider = [&](const std::optional<Exit>& e, bool outward) {
    if (!e || !outward || std::abs(s.sigma - e->sigma) > tol) return;
    if (!best || priority(e->kind) < priority(*best)) best = e->kind;
  };
  consider(g.exit_hi, ell_dot > 0);
  consider(g.exit_lo, ell_dot < 0);
  return best;
}

LimitState apply_jump(const DoubleWell& dw, const LimitState& pre, EventKind kind, const MProvider& M,
                      EventRecord* rec, double drop_mass) {
  const double ell = state_ell(dw, pre);
  LimitState post = pre;
  const bool upper = pre.sigma > 0;  // boundary at +sigma_* (or the merging root on that side)
  switch (kind) {
    case EventKind::Switching:
      if (pre.config == Configuration::S_minus || pre.config == Configuration::S_plus ||
          pre.config == Configuration::T_minus_plus) {
        if (upper) {
          post.m_zero = pre.m_minus;
          post.m_minus = 0;
        } else {
          post.m_zero = pre.m_plus;
          post.m_plus = 0;
        }
        post.entry = upper ? +1 : -1;
        post.phi = 0;
      } else {
        throw DomainError(std::string("switching from ") + config_name(pre.config));
      }
      break;
    case EventKind::InverseSwitching:
    case EventKind::MergingContinuous:
    case EventKind::MergingDiscontinuous:
    {
      if (pre.m_zero == 0) throw DomainError(std::string("no unstable peak to release in ") + config_name(pre.config));
      // the unstable mass joins the stable peak, or for S_zero the well on the side of the boundary reached
      bool to_minus = upper;
      if (pre.config == Configuration::T_zero_plus) to_minus = kind == EventKind::InverseSwitching;
      if (pre.config == Configuration::T_minus_zero) to_minus = kind != EventKind::InverseSwitching;
      if (to_minus) {
        post.m_minus = pre.m_minus + pre.m_zero;
      } else {
        post.m_plus = pre.m_plus + pre.m_zero;
      }
      post.m_zero = 0;
      post.phi = 0;
      post.entry = 0;
      break;
    }
    case EventKind::Splitting: {
      const double m0 = pre.m_zero;
      if (m0 == 0) throw DomainError("splitting without unstable peak");
      double to_partner = 0;
      if (pre.config == Configuration::T_minus_zero) {
        // mirrored problem: the partner sits in the left well
        to_partner = std::clamp(M(m0, -pre.sigma), 0.0, m0);
        post.m_minus = pre.m_minus + to_partner;
        post.m_plus = m0 - to_partner;
      } else {
        to_partner = std::clamp(M(m0, pre.sigma), 0.0, m0);
        post.m_plus = pre.m_plus + to_partner;
        post.m_minus = m0 - to_partner;
      }
      post.m_zero = 0;
      post.phi = 0;
      post.entry = 0;
      if (post.m_minus < drop_mass) {
        post.m_minus = 0;
        post.m_plus = 1;
      } else if (post.m_plus < drop_mass) {
        post.m_plus = 0;
        post.m_minus = 1;
      }
      break;
    }
  }
  if (kind == EventKind::Switching) {
    post.config = config_from_masses(post.m_minus, post.m_zero, post.m_plus);
  } else if (kind == EventKind::MergingContinuous || kind == EventKind::MergingDiscontinuous) {
    // all mass in one peak at the constraint
    post.m_minus = post.m_minus > 0 ? 1 : 0;
    post.m_plus = post.m_plus > 0 ? 1 : 0;
    post = settle(dw, post, ell);
  } else {
    post = settle(dw, post, ell);
  }
  if (kind == EventKind::Switching || kind == EventKind::InverseSwitching) post.sigma = pre.sigma;
  if (rec) {
    rec->t = pre.t;
    rec->kind = kind;
    rec->pre = pre;
    rec->post = post;
    rec->d_sigma = post.sigma - pre.sigma;
    rec->d_E = state_energy(dw, post) - state_energy(dw, pre);
    rec->energy_ok = !(kind == EventKind::Splitting || is_merging(kind)) || rec->d_E <= 1e-10;
  }
  return post;
}

LimitTrajectory integrate(const DoubleWell& dw, double a, const ConstraintPath& path, const LimitState& init,
                          double t_end, const MProvider& M, const LimitOptions& opt) {
  if (!(a > 0)) throw ValidationError("limit model: a must be positive");
  if (!(opt.scan_dt > 0)) throw ValidationError("limit model: scan_dt must be positive");
  LimitTrajectory tr;
  LimitState st = settle(dw, init, path.ell(init.t));
  st.config = init.config;
  validate_state(dw, st, a);

  auto sample = [&](const LimitState& s) {
    tr.samples.push_back({s.t, path.ell(s.t), s.config, s.m_minus, s.m_zero, s.m_plus, s.sigma, s.phi,
                          state_energy(dw, s)});
  };
  sample(st);

  const double t0 = init.t;
  std::size_t k = 0;
  // masses and configuration are frozen between events
  Segment g = make_segment(dw, st);
  while (st.t < t_end) {
    while (t0 + static_cast<double>(k + 1) * opt.scan_dt <= st.t) ++k;
    const double t_next = std::min(t0 + static_cast<double>(k + 1) * opt.scan_dt, t_end);
    auto sigma_at = [&](double t) { return g.sigma(path.ell(t)); };
    auto phi_at = [&](double t) {
      if (st.m_zero == 0 || t == st.t) return st.phi;
      auto f = [&](double u) { return dw.A(Branch::Zero, sigma_at(u)); };
      return st.phi + gk_integrate(f, st.t, t, 10, 1e-12);
    };

    struct Candidate {
      double t;
      EventKind kind;
      std::optional<double> sigma;
    };
    std::optional<Candidate> best;
    auto offer = [&](Candidate c) {
      if (!best || c.t < best->t - opt.t_tol ||
          (std::abs(c.t - best->t) <= opt.t_tol && priority(c.kind) < priority(best->kind)))
        best = c;
    };

    const double phi_next = phi_at(t_next);
    if (st.m_zero > 0 && phi_next <= -a) {
      double te = st.phi <= -a ? st.t : solve_bracket([&](double t) { return phi_at(t) + a; }, st.t, t_next, opt.t_tol);
      offer({te, EventKind::Splitting, std::nullopt});
    }
    const double l_next = path.ell(t_next);
    if (g.exit_hi && l_next > g.l_hi) {
      double te = path.ell(st.t) >= g.l_hi ? st.t
                                            : solve_bracket([&](double t) { return path.ell(t) - g.l_hi; }, st.t,
                                                            t_next, opt.t_tol);
      offer({te, g.exit_hi->kind, g.exit_hi->sigma});
    }
    if (g.exit_lo && l_next < g.l_lo) {
      double te = path.ell(st.t) <= g.l_lo ? st.t
                                            : solve_bracket([&](double t) { return path.ell(t) - g.l_lo; }, st.t,
                                                            t_next, opt.t_tol);
      offer({te, g.exit_lo->kind, g.exit_lo->sigma});
    }

    if (!best) {
      st.phi = phi_next;
      st.sigma = sigma_at(t_next);
      st.t = t_next;
      sample(st);
      continue;
    }

    LimitState pre = st;
    pre.t = best->t;
    pre.phi = best->kind == EventKind::Splitting ? -a : phi_at(best->t);
    pre.phi = std::max(pre.phi, -a);
    pre.sigma = best->sigma ? *best->sigma : sigma_at(best->t);
    sample(pre);
    EventRecord rec;
    st = apply_jump(dw, pre, best->kind, M, &rec, opt.drop_mass);
    st.t = best->t;
    g = make_segment(dw, st);
    tr.events.push_back(rec);
    sample(st);
    if (tr.events.size() > opt.max_events) {
      std::ostringstream os;
      os << "event-loop cap exceeded (" << opt.max_events << " events by t = " << st.t << ")";
      throw Error(os.str());
    }
  }
  tr.final_state = st;
  return tr;
}

NextEvent next_event_constant_rate(const DoubleWell& dw, double m1, double m2, double a, double ell_dot) {
  if (!(ell_dot > 0)) throw ValidationError("next event: rate must be positive");
  const double ss = dw.lm().sigma_star;
  auto Z = [&](double s) { return Z0p(dw, m1, m2, s); };
  auto zr = first_sign_change(Z, ss, -ss);
  const double s_end = zr ? *zr : -ss;

  // widening integral int_sigma^sigma_* Z / A+ ; the integrand is m1 + m2 A0 / A+ > 0
  auto w = [&](double s) { return Z(s) / dw.A(Branch::Plus, s); };
  auto F = [&](double s) { return gk_integrate(w, s, ss, 12, 1e-12); };
  const double target = a * ell_dot;
  NextEvent ev;
  if (F(s_end) >= target) {
    ev.kind = EventKind::Splitting;
    ev.sigma_ev = solve_bracket([&](double s) { return F(s) - target; }, s_end, ss);
  } else {
    ev.kind = zr ? EventKind::MergingDiscontinuous : EventKind::MergingContinuous;
    ev.sigma_ev = s_end;
  }
  // dt = (1/l') int |Z / (A0 A+)| d sigma; the integrand has an integrable 1/A0 singularity at -sigma_*
  auto q = [&](double s) { return std::abs(Z(s) / (dw.A(Branch::Zero, s) * dw.A(Branch::Plus, s))); };
  boost::math::quadrature::tanh_sinh<double> ts;
  ev.dt = ev.sigma_ev < ss ? ts.integrate(q, ev.sigma_ev, ss) / ell_dot : 0.0;
  auto G = [&](double s) { return m1 * dw.X(Branch::Zero, s) + m2 * dw.X(Branch::Plus, s); };
  ev.dt_check = (G(ev.sigma_ev) - G(ss)) / ell_dot;
  return ev;
}

void write_limit_csv(const std::string& path, const LimitTrajectory& tr) {
  CsvWriter w(path, {"t", "ell", "config", "m_minus", "m_zero", "m_plus", "sigma", "phi", "E"});
  for (const auto& s : tr.samples) {
    w.num(s.t).num(s.ell).str(config_name(s.config)).num(s.m_minus).num(s.m_zero).num(s.m_plus);
    w.num(s.sigma).num(s.phi).num(s.E);
    w.end_row();
  }
}

void write_event_json(const std::string& path, const LimitTrajectory& tr) {
  using nlohmann::json;
  auto js = [](const LimitState& s) {
    return json{{"config", config_name(s.config)}, {"m_minus", s.m_minus}, {"m_zero", s.m_zero},
                {"m_plus", s.m_plus},              {"sigma", s.sigma},     {"phi", s.phi},
                {"t", s.t}};
  };
  json arr = json::array();
  for (const auto& e : tr.events)
    arr.push_back({{"kind", event_name(e.kind)}, {"t", e.t}, {"pre", js(e.pre)}, {"post", js(e.post)},
                   {"dE", e.d_E}, {"dsigma", e.d_sigma}, {"energy_ok", e.energy_ok}});
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << arr.dump(2) << '\n';
}

}  // namespace cfp
