// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/fast_reaction.hpp"
#include "cfp/fp_solver.hpp"
#include "cfp/limit_dynamics.hpp"
#include "cfp/mass_splitting.hpp"
#include "cfp/peak_widening.hpp"
#include "cfp/two_peaks.hpp"

using namespace cfp;

namespace {

int failures = 0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

void criterion(const char* name, const std::function<Verdict()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!v.pass) ++failures;
  std::printf("%s  %-28s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), wall);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const DoubleWell& quartic() {
  static DoubleWell dw(Potential::quartic());
  return dw;
}

FpScenario fp_base(double nu, double tau, ConstraintPath path, double t_end) {
  FpScenario sc;
  sc.nu = nu;
  sc.tau = tau;
  sc.path = std::move(path);
  sc.t_end = t_end;
  sc.grid = Grid::for_model(quartic(), nu);
  return sc;
}

double l1(const DensityField& a, const DensityField& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
  return s * a.grid.dx();
}

Verdict fp_conservation() {
  auto r = run(quartic(), fp_base(0.05, 0.05, ConstraintPath::linear(-1.8, 1.0), 3.6));
  std::ostringstream os;
  os << "mass err " << r.max_mass_error << ", constraint err " << r.max_constraint_error << ", min rho " << r.min_rho
     << ", steps " << r.steps;
  return {r.max_mass_error <= 1e-12 && r.max_constraint_error <= 1e-8 && r.min_rho >= -1e-14, os.str()};
}

Verdict fp_symmetry() {
  const double nu = 0.05, tau = 0.05, t_end = 2.0;
  const DoubleWell& dw = quartic();
  Grid g = Grid::for_model(dw, nu);
  // even but out of equilibrium: the zero-force Gibbs state of a hotter system
  auto rho = equilibrium(dw.pot(), 0.0, 2 * nu, g);
  FokkerPlanckStepper st(dw.pot(), g, nu, tau);
  double t = 0, sigma = 0, m = 0;
  std::size_t steps = 0;
  while (t < t_end) {
    double dt = std::min(0.5 * st.max_dt(rho, sigma), t_end - t);
    sigma = st.step(rho, dt, 0.0, sigma);
    m = std::max(m, std::abs(sigma));
    t += dt;
    ++steps;
  }
  std::ostringstream os;
  os << "max |sigma| = " << m << " over " << steps << " steps";
  return {m <= 1e-10, os.str()};
}

Verdict fp_equilibrium() {
  const double nu = 0.05, tau = 0.05, ell = -1.2;
  const DoubleWell& dw = quartic();
  const double alpha = dw.d2H(ell);  // one well only: sigma lies below -sigma_*
  auto sc = fp_base(nu, tau, ConstraintPath::linear(ell, 0.0), 50 * tau / alpha);
  auto r = run(dw, sc);
  const double s_inf = r.series.back().sigma;
  auto eq = equilibrium(dw.pot(), s_inf, nu, sc.grid);
  double dist = l1(r.final_density, eq);
  FokkerPlanckStepper st(dw.pot(), sc.grid, nu, tau);
  auto rho = r.final_density;
  double dt = 0.5 * st.max_dt(rho, s_inf);
  st.step(rho, dt, ell, s_inf);
  double move = l1(rho, r.final_density);
  std::ostringstream os;
  os << "L1 to equilibrium " << dist << ", one-step move " << move << " (T = " << sc.t_end << ")";
  return {dist <= 1e-6 && move <= 1e-8, os.str()};
}

Verdict fp_audit() {
  const double nu = 0.05, tau = 0.05;
  auto coarse = fp_base(nu, tau, ConstraintPath::linear(-1.8, 1.0), 1.0);
  FokkerPlanckStepper probe(quartic().pot(), coarse.grid, nu, tau);
  auto rho0 = init_gaussian(quartic(), -1.8, nu, coarse.grid);
  // fixed steps below the stability bound over the run's support
  coarse.dt = 0.25 * probe.max_dt(rho0, quartic().dH(-1.8));
  auto fine = coarse;
  fine.grid = Grid::symmetric(0.5 * (coarse.grid.x_hi - coarse.grid.x_lo), coarse.grid.n_cells * 2);
  fine.dt = coarse.dt / 2;
  auto a = run(quartic(), coarse);
  auto b = run(quartic(), fine);
  double ratio = a.energy_residual / b.energy_residual;
  std::ostringstream os;
  os << "residual " << a.energy_residual << " -> " << b.energy_residual << ", ratio " << ratio;
  return {ratio >= 3, os.str()};
}

Verdict tpm_shadowing() {
  const DoubleWell& dw = quartic();
  const double m1 = 0.3, l0 = 0.1, l_stop = 0.5;
  auto path = ConstraintPath::linear(l0, 1.0);
  std::vector<double> gaps;
  std::ostringstream os;
  for (double tau : {1e-2, 5e-3, 2.5e-3}) {
    auto q = qs_solve(dw, m1, l0, Branch::Minus, Branch::Plus);
    TpmOptions opt;
    opt.sample_dt = 1e-3;
    auto tr = tpm_integrate({q.x1, q.x2, m1, 1 - m1, 0}, dw, tau, path, l_stop - l0, opt);
    double gap = 0;
    for (const auto& s : tr.samples) {
      auto qs = qs_track(dw, m1, path.ell(s.t));
      gap = std::max({gap, std::abs(s.x1 - qs.x1), std::abs(s.x2 - qs.x2)});
    }
    gaps.push_back(gap);
    os << "tau " << tau << ": gap/tau " << gap / tau << "; ";
  }
  bool ok = true;
  for (std::size_t i = 1; i < gaps.size(); ++i) {
    double r = gaps[i - 1] / gaps[i];
    ok = ok && std::abs(r / 2 - 1) <= 0.25;
  }
  os << "window l in [" << l0 << ", " << l_stop << "]";
  return {ok, os.str()};
}

LimitState two_peak_start(double m_minus) {
  LimitState s;
  s.config = Configuration::T_minus_plus;
  s.m_minus = m_minus;
  s.m_plus = 1 - m_minus;
  return s;
}

Verdict tangency_agreement() {
  const DoubleWell& dw = quartic();
  MProvider none = [](double, double) -> double { throw Error("no splitting expected"); };
  auto root = tangency(dw, 0.1);
  if (!root) return {false, "no tangency root for m1 = 0.1"};
  auto tr = integrate(dw, 1e9, ConstraintPath::linear(0.5, 1.0), two_peak_start(0.1), 3.0, none);
  const EventRecord* me = nullptr;
  for (const auto& e : tr.events)
    if (is_merging(e.kind) && !me) me = &e;
  if (!me || me->kind != EventKind::MergingDiscontinuous) return {false, "m1 = 0.1: no discontinuous merging"};
  double diff = std::abs(me->pre.sigma - *root);
  // the event time must put the constraint on the tangency state
  const double m1 = 0.1;
  double l_root = m1 * dw.X(Branch::Zero, *root) + (1 - m1) * dw.X(Branch::Plus, *root);
  double l_gap = std::abs(l_root - (0.5 + me->t));

  auto tr9 = integrate(dw, 1e9, ConstraintPath::linear(-0.7, 1.0), two_peak_start(0.9), 3.0, none);
  bool cont = false;
  for (const auto& e : tr9.events)
    if (is_merging(e.kind)) {
      cont = e.kind == EventKind::MergingContinuous;
      break;
    }
  bool no_root = !tangency(dw, 0.9);
  std::ostringstream os;
  os << "m1=0.1 |sigma_event - sigma_root| = " << diff << ", |l(t_event) - G(sigma_root)| = " << l_gap
     << "; m1=0.9 continuous " << cont << ", no Z-root " << no_root;
  return {diff <= 1e-6 && l_gap <= 1e-9 && cont && no_root, os.str()};
}

Verdict splitting_closed_form() {
  PathFn at_zero = [](double) { return 0.0; };
  const double t1 = 0.7;
  double worst = 0;
  for (double a : {0.1, 0.5, 1.0}) {
    auto t2 = splitting_time(at_zero, quartic(), a, t1, t1 + 2);
    if (!t2) return {false, fmt("no splitting for a = %g", a)};
    worst = std::max(worst, std::abs(*t2 - (t1 + a / 4)));
  }
  return {worst <= 1e-9, fmt("max |t2 - (t1 + a/4)| = %.3g", worst)};
}

Verdict msm_symmetry() {
  const DoubleWell& dw = quartic();
  const std::size_t N = 2000;
  bool ok = true;
  std::ostringstream os;
  for (double m1 : {0.4, 1.0}) {
    auto r = run_split(dw, m1, 0.0, N, 1e-3);
    auto e = init_ensemble(dw, m1, 0.0, N, 1e-3);
    double dev = std::abs(r.m12 - m1 / 2);
    double c1 = std::abs(dw.dH(r.x_hat1) - r.sigma_hat);
    double c2 = std::abs(dw.dH(r.x_hat2) - r.sigma_hat);
    double c3 = std::abs((m1 - r.m12) * r.x_hat1 + (1 - m1 + r.m12) * r.x_hat2 - e.ell);
    bool cell = r.converged && dev <= m1 * 2.0 / N + 1e-3 && r.constraint_drift <= 1e-10 && r.m12 >= 0 &&
                r.m12 <= m1 && std::max({c1, c2, c3}) <= 1e-8;
    ok = ok && cell;
    os << "m1 " << m1 << ": |m12-m1/2| " << dev << ", drift " << r.constraint_drift << ", closure "
       << std::max({c1, c2, c3}) << "; ";
  }
  return {ok, os.str()};
}

Verdict msm_refinement() {
  const DoubleWell& dw = quartic();
  const std::size_t N = 400;
  const double eps = default_eps(dw);
  const std::vector<std::pair<double, double>> cells = {{0.3, -0.5}, {0.3, 0.5}, {0.6, 0.0},
                                                        {0.6, 0.8},  {1.0, -0.8}, {1.0, 0.3}};
  double worst = 0;
  bool ok = true;
  for (auto [m1, s] : cells) {
    auto a = run_split(dw, m1, s, N, eps);
    auto b = run_split(dw, m1, s, 2 * N, eps);
    double d = std::abs(a.m12 - b.m12);
    worst = std::max(worst, d / (m1 / N));
    ok = ok && d <= m1 / N;
  }
  return {ok, fmt("max |m12(N)-m12(2N)| / (m1/N) = %.3g over 6 cells, N = 400", worst)};
}

Verdict kramers_plateau() {
  const DoubleWell& dw = quartic();
  const double b = 0.5, sb = sigma_b(dw, b);
  const double xm = dw.X(Branch::Minus, sb), xp = dw.X(Branch::Plus, sb), x0 = dw.X(Branch::Zero, sb);
  const double am = dw.d2H(xm), a0 = -dw.d2H(x0);
  const double hprime = x0 - xm;  // |h_-'(sigma_b)|
  const double slope_ref = -1 / (xp - xm);
  auto path = ConstraintPath::linear(-1.0, 1.0);
  std::vector<double> bias;
  bool ok = true;
  std::ostringstream os;
  for (double nu : {0.15, 0.12, 0.10}) {
    auto s = constrained_kramers_ode(dw, b, nu, path, 1.0, 0.0, 3.0);
    double sum_sigma = 0, sum_dev = 0, sum_ref = 0;
    double sl = 0, sm = 0, sll = 0, slm = 0;
    int n = 0;
    for (const auto& k : s) {
      if (!(k.m_minus > 0.25 && k.m_minus < 0.75)) continue;
      double psi_ref = std::log(2 * M_PI / (std::sqrt(am * a0) * (xp - xm)) * path.ell_dot(k.t) / k.m_minus) / hprime;
      sum_sigma += k.sigma;
      sum_dev += std::abs(k.psi - psi_ref);
      sum_ref += std::abs(psi_ref);
      sl += k.ell;
      sm += k.m_minus;
      sll += k.ell * k.ell;
      slm += k.ell * k.m_minus;
      ++n;
    }
    if (n < 10) return {false, fmt("too few mid-transfer samples at nu = %g", nu)};
    double mean_sigma = sum_sigma / n;
    double psi_err = sum_dev / sum_ref;
    double slope = (n * slm - sl * sm) / (n * sll - sl * sl);
    double slope_err = std::abs(slope / slope_ref - 1);
    bias.push_back(std::abs(mean_sigma - sb));
    ok = ok && psi_err <= 0.2 && slope_err <= 0.1;
    os << "nu " << nu << ": |<sigma>-sigma_b| " << bias.back() << ", psi rel " << psi_err << ", slope rel "
       << slope_err << "; ";
  }
  ok = ok && bias[0] > bias[1] && bias[1] > bias[2];
  return {ok, os.str()};
}

Verdict qs_limit() {
  const DoubleWell& dw = quartic();
  const double X = dw.X(Branch::Plus, 0.0);
  bool zero = qs_psi(dw, 0.0).psi == 0.0;
  double anti = std::abs(qs_psi(dw, 0.9 * X).psi + qs_psi(dw, -0.9 * X).psi);
  double slope_err = 0;
  for (double l : {-0.8 * X, -0.3 * X, 0.1 * X, 0.6 * X}) {
    const double h = 0.05 * X;
    auto p = qs_psi(dw, l), q = qs_psi(dw, l + h);
    slope_err = std::max(slope_err, std::abs((q.m_plus - p.m_plus) / h - 1 / (2 * X)));
    slope_err = std::max(slope_err, std::abs((q.m_minus - p.m_minus) / h + 1 / (2 * X)));
  }
  std::ostringstream os;
  os << "psi(0) == 0 " << zero << ", antisymmetry " << anti << ", slope error " << slope_err;
  return {zero && anti <= 1e-12 && slope_err <= 1e-10, os.str()};
}

char event_letter(EventKind k) {
  switch (k) {
    case EventKind::Switching: return 'W';
    case EventKind::InverseSwitching: return 'I';
    case EventKind::Splitting: return 'P';
    default: return 'M';
  }
}

Verdict limit_structure() {
  const DoubleWell& dw = quartic();
  const double a = 0.3, l0 = -1.5, t_end = 3.0;
  auto M = live_M(dw, 400, default_eps(dw));
  auto path = ConstraintPath::linear(l0, 1.0);
  auto tr = integrate(dw, a, path, LimitState{}, t_end, M);
  std::string seq;
  for (const auto& e : tr.events) seq += event_letter(e.kind);
  // a switching into the unstable branch is followed by splitting or by merging
  bool grammar = std::regex_match(seq, std::regex("W(PW)*P?M"));
  double merge_ell = tr.events.empty() ? 1e9 : path.ell(tr.events.back().t);
  bool ends = tr.final_state.config == Configuration::S_plus && merge_ell < dw.lm().x_starstar;
  double worst_dE = -1e300;
  int n_split = 0;
  for (const auto& e : tr.events) {
    if (e.kind == EventKind::Splitting) ++n_split;
    if (e.kind == EventKind::Splitting || is_merging(e.kind)) worst_dE = std::max(worst_dE, e.d_E);
  }
  const double C = -dw.d2H(0.0);  // largest spinodal curvature of the quartic
  const int bound = static_cast<int>(std::ceil(C * (t_end - 0.0) / a)) + 1;

  auto tr1 = integrate(dw, 5.0, path, LimitState{}, t_end, M);
  std::string seq1;
  for (const auto& e : tr1.events) seq1 += event_letter(e.kind);
  bool type1 = seq1 == "WM" && tr1.events.back().kind == EventKind::MergingContinuous &&
               tr1.final_state.config == Configuration::S_plus;

  std::ostringstream os;
  os << "events " << seq << " (merge at l = " << merge_ell << "), max dE " << worst_dE << ", splittings " << n_split
     << " <= " << bound << "; a=5: " << seq1;
  return {grammar && ends && worst_dE <= 1e-12 && n_split <= bound && type1, os.str()};
}

Verdict hysteresis() {
  const DoubleWell& dw = quartic();
  auto M = live_M(dw, 400, default_eps(dw));
  auto fwd = ConstraintPath::piecewise_linear({{0, -1.5}, {3, 1.5}, {6, -1.5}});
  auto bwd = ConstraintPath::piecewise_linear({{0, 1.5}, {3, -1.5}, {6, 1.5}});
  LimitState s_minus, s_plus;
  s_plus.config = Configuration::S_plus;
  s_plus.m_minus = 0;
  s_plus.m_plus = 1;
  auto a = integrate(dw, 0.3, fwd, s_minus, 6.0, M);
  auto b = integrate(dw, 0.3, bwd, s_plus, 6.0, M);
  if (a.samples.size() != b.samples.size())
    return {false, "sample counts differ: " + std::to_string(a.samples.size()) + " vs " + std::to_string(b.samples.size())};
  double worst = 0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto &p = a.samples[i], &q = b.samples[i];
    worst = std::max({worst, std::abs(p.t - q.t), std::abs(p.ell + q.ell), std::abs(p.sigma + q.sigma),
                      std::abs(p.m_minus - q.m_plus), std::abs(p.m_plus - q.m_minus), std::abs(p.m_zero - q.m_zero),
                      std::abs(p.E - q.E)});
  }
  std::ostringstream os;
  os << a.events.size() << " events each way, max reflection defect " << worst;
  return {worst <= 1e-8 && a.events.size() == b.events.size() && !a.events.empty(), os.str()};
}

Verdict classifier() {
  const auto& lm = quartic().lm();
  const double L = std::log(1e6);
  struct Row {
    double tau, nu;
    Regime want;
  };
  const std::vector<Row> rows = {{2 / L, 1e-6, Regime::SlowI},
                                 {0.5 / L, 1e-6, Regime::SlowII},
                                 {std::cbrt(1e-6), 1e-6, Regime::Open},
                                 {1e-3, 1e-3, Regime::FastLimiting},
                                 {std::exp(-0.5 / 0.01), 0.1, Regime::FastKramers},
                                 {std::exp(-150.0), 0.1, Regime::FastIV}};
  int right = 0;
  std::ostringstream os;
  for (const auto& r : rows) {
    Regime got = classify_regime(r.tau, r.nu, lm, 1.0);
    right += got == r.want;
    os << regime_name(got) << ' ';
  }
  bool refused = false;
  try {
    require_limit_model(classify_regime(std::cbrt(1e-6), 1e-6, lm, 1.0));
  } catch (const std::exception&) {
    refused = true;
  }
  os << "| " << right << "/6 rows, open refused " << refused;
  return {right == 6 && refused, os.str()};
}

}  // namespace

int main() {
  criterion("fp_conservation", fp_conservation);
  criterion("fp_symmetry", fp_symmetry);
  criterion("fp_equilibrium", fp_equilibrium);
  criterion("thermodynamic_audit", fp_audit);
  criterion("tpm_shadowing", tpm_shadowing);
  criterion("tangency_agreement", tangency_agreement);
  criterion("splitting_time_closed_form", splitting_closed_form);
  criterion("msm_symmetry", msm_symmetry);
  criterion("msm_refinement", msm_refinement);
  criterion("kramers_plateau", kramers_plateau);
  criterion("qs_limit", qs_limit);
  criterion("limit_structure", limit_structure);
  criterion("hysteresis", hysteresis);
  criterion("regime_classifier", classifier);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
