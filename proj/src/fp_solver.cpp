#include "cfp/fp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "cfp/csv.hpp"
#include "cfp/errors.hpp"

namespace cfp {

namespace {

// Bernoulli function z/(e^z - 1) and its derivative
double bern(double z) {
  if (std::abs(z) < 1e-3) return 1 - z / 2 + z * z / 12 - z * z * z * z / 720;
  return z / std::expm1(z);
}

double bern_prime(double z, double bz) {
  if (std::abs(z) < 1e-3) return -0.5 + z / 6 - z * z * z / 180;
  return bz * (1 - bz) / z - bz;
}

// Thomas algorithm with a reusable factorization
struct Tridiag {
  std::vector<double> lower, diag, upper;  // lower[0], upper[n-1] unused
  std::vector<double> cp, dp_inv;

  explicit Tridiag(std::size_t n) : lower(n), diag(n), upper(n), cp(n), dp_inv(n) {}

  void factor() {
    const std::size_t n = diag.size();
    dp_inv[0] = 1 / diag[0];
    cp[0] = upper[0] * dp_inv[0];
    for (std::size_t i = 1; i < n; ++i) {
      double den = diag[i] - lower[i] * cp[i - 1];
      dp_inv[i] = 1 / den;
      cp[i] = upper[i] * dp_inv[i];
    }
  }

  void solve(std::vector<double>& b) const {
    const std::size_t n = diag.size();
    b[0] *= dp_inv[0];
    for (std::size_t i = 1; i < n; ++i) b[i] = (b[i] - lower[i] * b[i - 1]) * dp_inv[i];
    for (std::size_t i = n - 1; i-- > 0;) b[i] -= cp[i] * b[i + 1];
  }
};

double positive_log(double v) { return v > 0 ? std::log(v) : 0.0; }

}  // namespace

Grid Grid::symmetric(double half_width, std::size_t n_cells) {
  if (!(half_width > 0) || n_cells < 2) throw ValidationError("grid: need half_width > 0 and n_cells >= 2");
  return Grid{-half_width, half_width, n_cells};
}

Grid Grid::for_model(const DoubleWell& dw, double nu, double dx_max) {
  double w = dw.lm().x_starstar + 4 * std::max(1.0, 8 * nu);
  if (dx_max <= 0) dx_max = nu / 4;
  auto n = static_cast<std::size_t>(std::ceil(2 * w / dx_max));
  n = std::max<std::size_t>(n, 512);
  if (n % 2) ++n;
  return symmetric(w, n);
}

double DensityField::mass() const {
  double s = 0;
  for (double v : values) s += v;
  return s * grid.dx();
}

double DensityField::moment() const {
  double s = 0;
  for (std::size_t i = 0; i < values.size(); ++i) s += grid.center(i) * values[i];
  return s * grid.dx();
}

double DensityField::variance() const {
  double mu = moment() / mass();
  double s = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double d = grid.center(i) - mu;
    s += d * d * values[i];
  }
  return s * grid.dx() / mass();
}

DensityField init_gaussian(const DoubleWell& dw, double ell0, double nu, const Grid& grid) {
  const double alpha = dw.d2H(ell0);
  if (!(alpha > 0)) {
    std::ostringstream os;
    os << "nonconvex initialization point: H''(" << ell0 << ") = " << alpha;
    throw DomainError(os.str());
  }
  DensityField rho{grid, std::vector<double>(grid.n_cells), 0};
  auto fill = [&](double c) {
    for (std::size_t i = 0; i < grid.n_cells; ++i) {
      double d = grid.center(i) - c;
      rho.values[i] = std::exp(-alpha * d * d / (2 * nu * nu));
    }
    double m = rho.mass();
    for (double& v : rho.values) v /= m;
  };
  // a peak narrower than a few cells has an aliased discrete mean; shift the
  // sampled centre until the discrete mean is ell0
  double c = ell0;
  for (int it = 0; it < 50; ++it) {
    fill(c);
    double err = rho.moment() - ell0;
    if (std::abs(err) < 1e-15 * std::max(1.0, std::abs(ell0))) break;
    c -= err;
  }
  return rho;
}

double multiplier(const DensityField& rho, const Potential& pot, double tau, double ell_dot) {
  double s = 0;
  for (std::size_t i = 0; i < rho.values.size(); ++i) s += pot.d1(rho.grid.center(i)) * rho.values[i];
  return s * rho.grid.dx() + tau * ell_dot;
}

DensityField equilibrium(const Potential& pot, double sigma, double nu, const Grid& grid) {
  DensityField rho{grid, std::vector<double>(grid.n_cells), 0};
  double emax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.n_cells; ++i) {
    double x = grid.center(i);
    rho.values[i] = -(pot.eval(x) - sigma * x) / (nu * nu);
    emax = std::max(emax, rho.values[i]);
  }
  for (double& v : rho.values) v = std::exp(v - emax);
  double m = rho.mass();
  for (double& v : rho.values) v /= m;
  return rho;
}

FokkerPlanckStepper::FokkerPlanckStepper(const Potential& pot, const Grid& grid, double nu, double tau)
    : pot_(pot), grid_(grid), nu_(nu), tau_(tau) {
  if (!(nu > 0) || !(tau > 0)) throw ValidationError("fp: nu and tau must be positive");
  const std::size_t n = grid.n_cells;
  x_.resize(n);
  H_.resize(n);
  dH_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    x_[i] = grid.center(i);
    H_[i] = pot.eval(x_[i]);
    dH_[i] = pot.d1(x_[i]);
  }
  dHf_.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) dHf_[i] = H_[i + 1] - H_[i];
}

// face f between cells f and f+1: J_f = a_f rho_{f+1} - c_f rho_f
void FokkerPlanckStepper::coefficients(double sigma, std::vector<double>& a, std::vector<double>& c,
                                       std::vector<double>* da, std::vector<double>* dc) const {
  const std::size_t nf = dHf_.size();
  const double dx = grid_.dx(), nu2 = nu_ * nu_, s = nu2 / dx;
  a.resize(nf);
  c.resize(nf);
  if (da) {
    da->resize(nf);
    dc->resize(nf);
  }
  for (std::size_t f = 0; f < nf; ++f) {
    double delta = (dHf_[f] - sigma * dx) / nu2;
    double b = bern(delta);
    c[f] = s * b;
    a[f] = s * (b + delta);  // B(-z) = B(z) + z
    if (da) {
      double bp = bern_prime(delta, b);
      (*dc)[f] = -bp;
      (*da)[f] = -bp - 1;
    }
  }
}

double FokkerPlanckStepper::step(DensityField& rho, double dt, double ell_target, double sigma_guess,
                                 PointPeak* peak) const {
  const std::size_t n = grid_.n_cells;
  const double dx = grid_.dx();
  const double k = dt / (2 * tau_);
  const double m1 = peak ? peak->m1 : 1.0;
  const double m2 = peak ? peak->m2 : 0.0;
  const double x2n = peak ? peak->x2 : 0.0;
  const double tol = 1e-13 * std::max(1.0, std::abs(ell_target));

  const std::vector<double>& old = rho.values;
  std::vector<double> a, c, da, dc, nxt(n), drho(n), sum(n);
  Tridiag M(n);
  double sigma = sigma_guess;
  double x2new = x2n;

  for (int iter = 0; iter < 60; ++iter) {
    coefficients(sigma, a, c, &da, &dc);
    for (std::size_t i = 0; i < n; ++i) {
      double cl = i > 0 ? c[i - 1] : 0.0;  // inflow from the left
      double al = i > 0 ? a[i - 1] : 0.0;
      double cr = i + 1 < n ? c[i] : 0.0;
      double ar = i + 1 < n ? a[i] : 0.0;
      M.lower[i] = -k * cl / dx;
      M.diag[i] = 1 + k * (cr + al) / dx;
      M.upper[i] = -k * ar / dx;
      double lr = (cl * (i > 0 ? old[i - 1] : 0.0) - (cr + al) * old[i] + ar * (i + 1 < n ? old[i + 1] : 0.0)) / dx;
      nxt[i] = old[i] + k * lr;
    }
    M.factor();
    M.solve(nxt);

    for (std::size_t i = 0; i < n; ++i) sum[i] = old[i] + nxt[i];
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0;
      if (i + 1 < n) v += da[i] * sum[i + 1] - dc[i] * sum[i];
      if (i > 0) v += dc[i - 1] * sum[i - 1] - da[i - 1] * sum[i];
      drho[i] = k * v / dx;
    }
    M.solve(drho);

    double mom = 0, dmom = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mom += x_[i] * nxt[i];
      dmom += x_[i] * drho[i];
    }
    mom *= dx;
    dmom *= dx;

    double dx2 = 0;
    if (peak && m2 > 0) {
      // implicit trapezoid for tau x2' = sigma - H'(x2)
      const double h = dt / tau_;
      const double f0 = pot_.d1(x2n);
      double y = x2n;
      for (int j = 0; j < 50; ++j) {
        double r = y - x2n - h * (sigma - 0.5 * (f0 + pot_.d1(y)));
        double dr = 1 + 0.5 * h * pot_.d2(y);
        double dy = r / dr;
        y -= dy;
        if (std::abs(dy) < 1e-15 * std::max(1.0, std::abs(y))) break;
      }
      x2new = y;
      dx2 = h / (1 + 0.5 * h * pot_.d2(y));
    }

    double g = m1 * mom + m2 * x2new - ell_target;
    double dg = m1 * dmom + m2 * dx2;
    if (std::abs(g) <= tol) {
      rho.values.swap(nxt);
      rho.t += dt;
      if (peak) peak->x2 = x2new;
      return sigma;
    }
    if (!(std::abs(dg) >= 1e-14)) throw Error("constraint unreachable: d(moment)/d(sigma) vanishes");
    sigma -= g / dg;
  }
  throw Error("constraint unreachable: multiplier iteration did not converge");
}

double FokkerPlanckStepper::max_dt(const DensityField& rho, double sigma) const {
  const std::size_t n = grid_.n_cells;
  const double dx = grid_.dx();
  double rmax = 0;
  for (double v : rho.values) rmax = std::max(rmax, v);
  const double floor = 1e-12 * rmax;
  std::vector<double> a, c;
  coefficients(sigma, a, c, nullptr, nullptr);
  double bmax = 0, diag_max = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(rho.values[i] > floor)) continue;
    bmax = std::max(bmax, std::abs(dH_[i] - sigma));
    double d = ((i + 1 < n ? c[i] : 0.0) + (i > 0 ? a[i - 1] : 0.0)) / dx;
    diag_max = std::max(diag_max, d);
  }
  double dt_adv = bmax > 0 ? 0.5 * tau_ * dx / bmax : std::numeric_limits<double>::infinity();
  double dt_pos = diag_max > 0 ? tau_ / diag_max : std::numeric_limits<double>::infinity();
  return std::min(dt_adv, dt_pos);
}

double FokkerPlanckStepper::dissipation(const DensityField& rho, double sigma) const {
  const std::size_t n = grid_.n_cells;
  const double dx = grid_.dx(), nu2 = nu_ * nu_;
  std::vector<double> a, c;
  coefficients(sigma, a, c, nullptr, nullptr);
  const auto& r = rho.values;
  double d = 0;
  for (std::size_t f = 0; f + 1 < n; ++f) {
    if (!(r[f] > 1e-200) || !(r[f + 1] > 1e-200)) continue;
    double J = a[f] * r[f + 1] - c[f] * r[f];
    double dmu = (dHf_[f] - sigma * dx) + nu2 * std::log(r[f + 1] / r[f]);
    d += std::max(0.0, J * dmu);  // the two factors share a sign; drop rounding noise
  }
  return d / tau_;
}

Observables FokkerPlanckStepper::observe(const DensityField& rho, double sigma, double ell) const {
  Observables o;
  const double dx = grid_.dx();
  double mom = 0, y = 0, mm = 0, mp = 0, hint = 0, ent = 0, m = 0;
  for (std::size_t i = 0; i < rho.values.size(); ++i) {
    double v = rho.values[i];
    m += v;
    mom += x_[i] * v;
    y += dH_[i] * v;
    hint += H_[i] * v;
    if (v > 0) ent += v * positive_log(v);
    if (x_[i] < 0) mm += v;
    else if (x_[i] > 0) mp += v;
    else {
      mm += 0.5 * v;
      mp += 0.5 * v;
    }
  }
  o.t = rho.t;
  o.ell = ell;
  o.ell_hat = mom * dx;
  o.y = y * dx;
  o.m_minus = mm * dx;
  o.m_plus = mp * dx;
  o.H_int = hint * dx;
  o.S = -nu_ * nu_ * ent * dx;
  o.E = o.H_int - o.S;
  o.D = dissipation(rho, sigma);
  o.sigma = sigma;
  double mu = o.ell_hat / (m * dx);
  double var = 0;
  for (std::size_t i = 0; i < rho.values.size(); ++i) var += (x_[i] - mu) * (x_[i] - mu) * rho.values[i];
  o.width = std::sqrt(std::max(0.0, var * dx / (m * dx)));
  return o;
}

DensityField step(const DensityField& rho, const Potential& pot, double nu, double tau,
                  const ConstraintPath& path, double dt) {
  FokkerPlanckStepper st(pot, rho.grid, nu, tau);
  double guess = multiplier(rho, pot, tau, path.ell_dot(rho.t));
  double bound = st.max_dt(rho, guess);
  if (dt > bound * (1 + 1e-12)) {
    std::ostringstream os;
    os << "CFL violation: dt = " << dt << " exceeds bound " << bound;
    throw Error(os.str());
  }
  DensityField out = rho;
  st.step(out, dt, path.ell(rho.t + dt), guess);
  return out;
}

namespace {

FpRun simulate(const DoubleWell& dw, const FpScenario& sc, bool with_peak) {
  if (!(sc.t_end > sc.t0)) throw ValidationError("fp: t_end must exceed t0");
  const Potential& pot = dw.pot();
  FokkerPlanckStepper st(pot, sc.grid, sc.nu, sc.tau);
  FokkerPlanckStepper::PointPeak peak{sc.m1, sc.m2, sc.x2_init};
  FokkerPlanckStepper::PointPeak* pp = with_peak ? &peak : nullptr;
  if (with_peak) {
    if (std::abs(sc.m1 + sc.m2 - 1) > 1e-12 || sc.m1 <= 0 || sc.m2 < 0)
      throw ValidationError("pwm: masses must satisfy m1 > 0, m2 >= 0, m1 + m2 = 1");
  }

  double ell0 = sc.ell_init_from_path ? sc.path.ell(sc.t0) : sc.ell_init;
  if (with_peak && sc.ell_init_from_path) ell0 = (sc.path.ell(sc.t0) - sc.m2 * sc.x2_init) / sc.m1;
  DensityField rho = init_gaussian(dw, ell0, sc.nu, sc.grid);
  rho.t = sc.t0;

  FpRun out;
  auto constraint_value = [&](const DensityField& r) {
    return with_peak ? peak.m1 * r.moment() + peak.m2 * peak.x2 : r.moment();
  };
  auto track = [&](const DensityField& r) {
    out.max_mass_error = std::max(out.max_mass_error, std::abs(r.mass() - 1));
    out.max_constraint_error =
        std::max(out.max_constraint_error, std::abs(constraint_value(r) - sc.path.ell(r.t)));
    for (double v : r.values) out.min_rho = std::min(out.min_rho, v);
  };

  double sigma = multiplier(rho, pot, sc.tau, sc.path.ell_dot(sc.t0));
  if (with_peak) {
    double y = multiplier(rho, pot, 0, 0);
    sigma = peak.m1 * y + peak.m2 * pot.d1(peak.x2) + sc.tau * sc.path.ell_dot(sc.t0);
  }
  out.min_rho = rho.values.front();
  track(rho);

  auto record = [&](const Observables& o) {
    out.series.push_back(o);
    out.x2.push_back(with_peak ? peak.x2 : std::numeric_limits<double>::quiet_NaN());
  };
  record(st.observe(rho, sigma, sc.path.ell(rho.t)));

  const double eps_t = 1e-12 * std::max(1.0, std::abs(sc.t_end));
  double next_sample = sc.sample_every > 0 ? sc.t0 + sc.sample_every : sc.t_end;
  double next_snap = sc.snapshot_every > 0 ? sc.t0 : std::numeric_limits<double>::infinity();
  std::size_t sample_k = 1, snap_k = 0;
  if (next_snap <= sc.t0 + eps_t) {
    out.snapshots.push_back(rho);
    ++snap_k;
    next_snap = sc.t0 + snap_k * sc.snapshot_every;
  }

  DensityField prev;
  while (rho.t < sc.t_end - eps_t) {
    double bound = st.max_dt(rho, sigma);
    double dt;
    if (sc.dt > 0) {
      dt = sc.dt;
      if (dt > bound * (1 + 1e-12)) {
        std::ostringstream os;
        os << "CFL violation at t = " << rho.t << ": dt = " << dt << " exceeds bound " << bound;
        throw Error(os.str());
      }
    } else {
      dt = sc.cfl * bound / 0.5;  // cfl is measured against the 0.5 safety factor
      dt = std::min(dt, bound);
    }
    double stop = std::min({sc.t_end, next_sample, next_snap});
    bool hit = false;
    if (rho.t + dt >= stop - eps_t) {
      dt = stop - rho.t;
      hit = true;
    }
    if (!(dt > 0)) throw Error("fp: non-positive time step");

    prev = rho;
    const double x2_prev = peak.x2;
    const double ell_prev = sc.path.ell(rho.t);
    const double t_new = hit ? stop : rho.t + dt;
    const double ell_new = sc.path.ell(t_new);
    double guess = sigma;
    {
      double y = multiplier(rho, pot, 0, 0);
      double x2f = with_peak ? pot.d1(peak.x2) : 0.0;
      guess = (with_peak ? peak.m1 * y + peak.m2 * x2f : y) + sc.tau * (ell_new - ell_prev) / dt;
    }
    sigma = st.step(rho, dt, ell_new, guess, pp);
    if (hit) rho.t = stop;
    ++out.steps;

    // discrete energy balance over the step
    Observables o0 = st.observe(prev, sigma, ell_prev);
    Observables o1 = st.observe(rho, sigma, ell_new);
    double dE = o1.E - o0.E;
    if (with_peak) {
      dE = peak.m1 * dE + peak.m2 * (pot.eval(peak.x2) - pot.eval(x2_prev));
      // point-peak dissipation: tau * x2'^2, trapezoid in the force
      double v0 = (sigma - pot.d1(x2_prev)) / sc.tau, v1 = (sigma - pot.d1(peak.x2)) / sc.tau;
      double dpk = 0.5 * sc.tau * (v0 * v0 + v1 * v1);
      out.energy_residual +=
          std::abs(dE + dt * (peak.m1 * 0.5 * (o0.D + o1.D) + peak.m2 * dpk) - sigma * (ell_new - ell_prev));
    } else {
      out.energy_residual += std::abs(dE + dt * 0.5 * (o0.D + o1.D) - sigma * (ell_new - ell_prev));
    }
    track(rho);

    bool sample_now = sc.sample_every <= 0 || std::abs(rho.t - next_sample) <= eps_t ||
                      rho.t >= sc.t_end - eps_t;
    if (sample_now) {
      o1.t = rho.t;
      record(o1);
      if (sc.sample_every > 0) {
        ++sample_k;
        next_sample = std::min(sc.t_end, sc.t0 + sample_k * sc.sample_every);
      }
    }
    if (std::abs(rho.t - next_snap) <= eps_t) {
      out.snapshots.push_back(rho);
      ++snap_k;
      next_snap = sc.t0 + snap_k * sc.snapshot_every;
      if (next_snap > sc.t_end + eps_t) next_snap = std::numeric_limits<double>::infinity();
    }
  }
  out.final_density = rho;
  return out;
}

}  // namespace

FpRun run(const DoubleWell& dw, const FpScenario& sc) { return simulate(dw, sc, false); }

FpRun pwm_run(const DoubleWell& dw, const FpScenario& sc) {
  const auto& lm = dw.lm();
  if (sc.m2 > 0 && !(sc.x2_init > lm.x_star && sc.x2_init < lm.x_starstar))
    throw ValidationError("pwm: x2(0) must lie in (x_*, x_**)");
  return simulate(dw, sc, true);
}

void write_series_csv(const std::string& path, const FpRun& r) {
  CsvWriter w(path, {"t", "ell", "sigma", "y", "m_minus", "m_plus", "E", "S", "D", "width", "ell_hat", "x2"});
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    const auto& o = r.series[i];
    w.num(o.t).num(o.ell).num(o.sigma).num(o.y).num(o.m_minus).num(o.m_plus).num(o.E).num(o.S).num(o.D)
        .num(o.width).num(o.ell_hat).num(i < r.x2.size() ? r.x2[i] : std::numeric_limits<double>::quiet_NaN());
    w.end_row();
  }
}

void write_snapshots_csv(const std::string& dir, const FpRun& r) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
    const auto& s = r.snapshots[k];
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%04zu.csv", k);
    CsvWriter w((std::filesystem::path(dir) / name).string(), {"t", "x", "rho"});
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      w.num(s.t).num(s.grid.center(i)).num(s.values[i]);
      w.end_row();
    }
  }
}

}  // namespace cfp
