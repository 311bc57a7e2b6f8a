#include "cfp/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <set>
#include <sstream>

#include "cfp/csv.hpp"
#include "cfp/errors.hpp"
#include "cfp/fast_reaction.hpp"
#include "cfp/fp_solver.hpp"
#include "cfp/limit_dynamics.hpp"
#include "cfp/mass_splitting.hpp"
#include "cfp/potential.hpp"
#include "cfp/two_peaks.hpp"

namespace cfp {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_number(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError(key + ": '" + s + "' is not a number");
  }
  while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
  if (used != s.size()) throw ValidationError(key + ": '" + s + "' is not a number");
  if (!std::isfinite(v)) throw ValidationError(key + ": value must be finite");
  return v;
}

const std::set<std::string> kNumericKeys = {
    "nu",     "tau",     "a",       "b",        "m1",        "x1",         "x2",    "sigma",
    "N",      "eps",     "dx",      "half_width", "dt",      "cfl",        "sample_every",
    "snapshot_every",    "ell_init", "abs_tol", "rel_tol",   "ds",         "s_max", "tol",
    "scan_dt", "m0",     "sample_dt", "a_crit", "n_samples", "drop_mass",  "richardson"};
const std::set<std::string> kOptionKeys = {"init", "m_table", "m1_grid", "sigma_grid"};

const std::map<std::string, std::vector<std::string>> kRequired = {
    {"fp", {"nu", "tau"}},
    {"pwm", {"nu", "tau", "m1", "x2"}},
    {"tpm", {"tau", "m1"}},
    {"msm", {"m1", "sigma"}},
    {"limit", {"a"}},
    {"kramers", {"b", "nu"}},
    {"qs", {}},
    {"classify", {"tau", "nu"}},
    {"tabulate-M", {}},
    {"verify", {}},
};

bool uses_path(const std::string& model) {
  return model != "msm" && model != "classify" && model != "tabulate-M" && model != "verify";
}

void set_default(Scenario& sc, const std::string& key, double v) {
  if (!sc.has(key)) sc.params[key] = v;
}

std::vector<std::pair<double, double>> parse_points(const std::string& s) {
  std::vector<std::pair<double, double>> pts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError("constraint.points: expected t:l pairs, got '" + item + "'");
    pts.push_back({to_number(item.substr(0, colon), "constraint.points"),
                   to_number(item.substr(colon + 1), "constraint.points")});
  }
  return pts;
}

void finalize(Scenario& sc) {
  auto req = kRequired.find(sc.model);
  if (req == kRequired.end()) {
    std::string list;
    for (const auto& m : known_models()) list += (list.empty() ? "" : ", ") + m;
    throw ValidationError("scenario.model: unknown model '" + sc.model + "' (expected one of " + list + ")");
  }
  for (const auto& k : req->second)
    if (!sc.has(k)) throw ValidationError("params." + k + ": required for model " + sc.model);
  DoubleWell dw(Potential::by_name(sc.potential));
  const auto& lm = dw.lm();

  auto& c = sc.constraint;
  if (uses_path(sc.model)) {
    if (c.kind == "piecewise") {
      if (c.points.size() < 2) throw ValidationError("constraint.points: piecewise constraint needs two breakpoints");
    } else if (c.kind != "linear") {
      throw ValidationError("constraint.kind: expected linear or piecewise, got '" + c.kind + "'");
    }
    if (!(c.t_end > c.t0)) throw ValidationError("constraint.t_end: must exceed t0");
    auto [lo, hi] = c.path().rate_bounds(c.t0, c.t_end);
    std::string derived = lo > 0 ? "increasing" : hi < 0 ? "decreasing" : "none";
    if (c.monotone.empty()) {
      c.monotone = derived;
    } else if (c.monotone != derived) {
      throw ValidationError("constraint.monotone: declared '" + c.monotone + "' but the rate range [" + fmt(lo) + ", " +
                            fmt(hi) + "] is " + derived);
    }
  }
  const double span = c.t_end - c.t0;

  if (sc.model == "fp" || sc.model == "pwm") {
    const double nu = sc.get("nu");
    if (!(nu > 0) || !(sc.get("tau") > 0)) throw ValidationError("params.nu, params.tau: must be positive");
    set_default(sc, "dx", nu / 4);
    set_default(sc, "half_width", lm.x_starstar + 4 * std::max(1.0, 8 * nu));
    set_default(sc, "dt", 0);
    set_default(sc, "cfl", 0.5);
    set_default(sc, "sample_every", span / 1000);
    set_default(sc, "snapshot_every", 0);
    if (sc.model == "pwm" && !(sc.get("m1") > 0 && sc.get("m1") <= 1))
      throw ValidationError("params.m1: must lie in (0, 1]");
  } else if (sc.model == "tpm") {
    if (!(sc.get("m1") >= 0 && sc.get("m1") <= 1)) throw ValidationError("params.m1: must lie in [0, 1]");
    set_default(sc, "abs_tol", 1e-10);
    set_default(sc, "rel_tol", 1e-8);
    set_default(sc, "sample_dt", span / 1000);
    if (sc.has("x1") != sc.has("x2")) throw ValidationError("params.x1, params.x2: give both or neither");
  } else if (sc.model == "msm") {
    set_default(sc, "N", 2000);
    set_default(sc, "eps", default_eps(dw));
    set_default(sc, "ds", 1e-3);
    set_default(sc, "s_max", 200);
    set_default(sc, "tol", 1e-8);
    set_default(sc, "richardson", 0);
  } else if (sc.model == "limit") {
    set_default(sc, "N", 400);
    set_default(sc, "eps", default_eps(dw));
    set_default(sc, "scan_dt", 1e-3);
    set_default(sc, "drop_mass", 1e-9);
    if (!sc.options.count("init")) {
      double l0 = c.path().ell(c.t0);
      sc.options["init"] = l0 < -lm.x_star ? "S_minus" : l0 > lm.x_star ? "S_plus" : "S_zero";
    }
    const std::string init = sc.options["init"];
    static const std::set<std::string> inits = {"S_minus", "S_plus", "S_zero", "T_minus_plus", "T_zero_plus",
                                                "T_minus_zero"};
    if (!inits.count(init)) throw ValidationError("options.init: unknown configuration '" + init + "'");
    if (init[0] == 'T' && !sc.has("m1")) throw ValidationError("params.m1: required for two-peak initial data");
  } else if (sc.model == "kramers") {
    set_default(sc, "m0", 1);
    set_default(sc, "sample_dt", 1e-3);
    if (c.monotone != "increasing") throw ValidationError("constraint: the Kramers model needs an increasing constraint");
  } else if (sc.model == "qs") {
    set_default(sc, "sample_dt", span / 1000);
  } else if (sc.model == "tabulate-M") {
    for (const char* k : {"m1_grid", "sigma_grid"})
      if (!sc.options.count(k)) throw ValidationError(std::string("options.") + k + ": required for model tabulate-M");
    parse_grid(sc.options["m1_grid"], "options.m1_grid");
    parse_grid(sc.options["sigma_grid"], "options.sigma_grid");
    set_default(sc, "N", 2000);
    set_default(sc, "eps", default_eps(dw));
    set_default(sc, "ds", 1e-3);
    set_default(sc, "s_max", 200);
    set_default(sc, "tol", 1e-8);
  } else if (sc.model == "verify") {
    set_default(sc, "n_samples", 2000);
  }
}

}  // namespace

ConstraintPath ConstraintSpec::path() const {
  if (kind == "piecewise") return ConstraintPath::piecewise_linear(points);
  return ConstraintPath::linear(c0, c1);
}

double Scenario::get(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw ValidationError("params." + key + ": missing");
  return it->second;
}

std::string Scenario::opt(const std::string& key, const std::string& fallback) const {
  auto it = options.find(key);
  return it == options.end() ? fallback : it->second;
}

const std::vector<std::string>& known_models() {
  static const std::vector<std::string> m = {"fp",       "pwm",      "tpm",        "msm",   "limit",
                                             "kramers",  "qs",       "classify",   "tabulate-M", "verify"};
  return m;
}

std::vector<double> parse_grid(const std::string& spec, const std::string& what) {
  std::stringstream ss(spec);
  std::string a, b, n;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, n))
    throw ValidationError(what + ": expected a:b:n, got '" + spec + "'");
  double nv = to_number(n, what);
  if (nv < 1 || nv != std::floor(nv)) throw ValidationError(what + ": point count must be a positive integer");
  return linspace(to_number(a, what), to_number(b, what), static_cast<std::size_t>(nv));
}

Scenario parse_scenario_string(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  Scenario sc;
  bool have_model = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ValidationError(origin + ": key '" + section + "' must live inside a section");
    for (const auto& [key, node] : body) {
      const std::string path = section + "." + key;
      const std::string v = node.data();
      if (section == "scenario") {
        if (key == "model") {
          sc.model = v;
          have_model = true;
        } else if (key == "potential") {
          sc.potential = v;
        } else {
          throw ValidationError(origin + ": unknown key " + path);
        }
      } else if (section == "constraint") {
        auto& c = sc.constraint;
        if (key == "kind") c.kind = v;
        else if (key == "c0") c.c0 = to_number(v, path);
        else if (key == "c1") c.c1 = to_number(v, path);
        else if (key == "points") c.points = parse_points(v);
        else if (key == "t0") c.t0 = to_number(v, path);
        else if (key == "t_end") c.t_end = to_number(v, path);
        else if (key == "monotone") c.monotone = v;
        else throw ValidationError(origin + ": unknown key " + path);
      } else if (section == "params") {
        if (!kNumericKeys.count(key)) throw ValidationError(origin + ": unknown key " + path);
        sc.params[key] = to_number(v, path);
      } else if (section == "options") {
        if (!kOptionKeys.count(key)) throw ValidationError(origin + ": unknown key " + path);
        sc.options[key] = v;
      } else {
        throw ValidationError(origin + ": unknown section [" + section + "]");
      }
    }
  }
  if (!have_model) throw ValidationError(origin + ": scenario.model is required");
  try {
    finalize(sc);
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  return sc;
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_string(ss.str(), path);
}

std::string preset_text(const std::string& name) {
  if (name == "fig2") {
    return "; arctan double well driven through the phase transition by l(t) = t - 4\n"
           "[scenario]\n"
           "model = fp\n"
           "potential = arctan\n"
           "[constraint]\n"
           "kind = linear\n"
           "c0 = -4\n"
           "c1 = 1\n"
           "t0 = 0\n"
           "t_end = 8\n"
           "[params]\n"
           "tau = 0.1\n"
           "nu = 0.1\n"
           "snapshot_every = 0.5\n";
  }
  throw ValidationError("unknown preset '" + name + "' (available: fig2)");
}

Scenario preset(const std::string& name) { return parse_scenario_string(preset_text(name), "preset " + name); }

std::string to_ini(const Scenario& sc) {
  std::ostringstream os;
  os << "[scenario]\nmodel = " << sc.model << "\npotential = " << sc.potential << "\n";
  const auto& c = sc.constraint;
  os << "[constraint]\nkind = " << c.kind << "\n";
  if (c.kind == "piecewise") {
    os << "points = ";
    for (std::size_t i = 0; i < c.points.size(); ++i)
      os << (i ? ", " : "") << fmt(c.points[i].first) << ":" << fmt(c.points[i].second);
    os << "\n";
  } else {
    os << "c0 = " << fmt(c.c0) << "\nc1 = " << fmt(c.c1) << "\n";
  }
  os << "t0 = " << fmt(c.t0) << "\nt_end = " << fmt(c.t_end) << "\n";
  if (!c.monotone.empty()) os << "monotone = " << c.monotone << "\n";
  os << "[params]\n";
  for (const auto& [k, v] : sc.params) os << k << " = " << fmt(v) << "\n";
  if (!sc.options.empty()) {
    os << "[options]\n";
    for (const auto& [k, v] : sc.options) os << k << " = " << v << "\n";
  }
  return os.str();
}

namespace {

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

void write_meta(const DoubleWell& dw, const Scenario& sc, const fs::path& dir) {
  const auto& lm = dw.lm();
  nlohmann::json j = {{"model", sc.model},          {"potential", sc.potential}, {"x_star", lm.x_star},
                      {"x_starstar", lm.x_starstar}, {"sigma_star", lm.sigma_star}, {"h_crit", lm.h_crit},
                      {"h_star", lm.h_star}};
  std::ofstream(join(dir, "meta.json")) << j.dump(2) << '\n';
}

std::string masses(double mm, double mp) {
  std::ostringstream os;
  os << "m_minus=" << mm << " m_plus=" << mp;
  return os.str();
}

}  // namespace

DispatchResult dispatch(const Scenario& sc, const std::string& out_dir, unsigned workers) {
  fs::path dir(out_dir);
  fs::create_directories(dir);
  DispatchResult res;
  auto file = [&](const std::string& name) {
    res.files.push_back(join(dir, name));
    return res.files.back();
  };
  std::ofstream(file("effective.cfg")) << to_ini(sc);

  DoubleWell dw(Potential::by_name(sc.potential));
  write_meta(dw, sc, dir);
  res.files.push_back(join(dir, "meta.json"));
  const auto& c = sc.constraint;
  const ConstraintPath path = c.path();
  std::ostringstream summary;
  summary << sc.model << ": ";

  if (sc.model == "fp" || sc.model == "pwm") {
    FpScenario f;
    f.nu = sc.get("nu");
    f.tau = sc.get("tau");
    f.path = path;
    f.t0 = c.t0;
    f.t_end = c.t_end;
    const double w = sc.get("half_width"), dx = sc.get("dx");
    auto n = static_cast<std::size_t>(std::ceil(2 * w / dx));
    n = std::max<std::size_t>(n, 512);
    if (n % 2) ++n;
    f.grid = Grid::symmetric(w, n);
    f.dt = sc.get("dt");
    f.cfl = sc.get("cfl");
    f.sample_every = sc.get("sample_every");
    f.snapshot_every = sc.get("snapshot_every");
    if (sc.has("ell_init")) {
      f.ell_init = sc.get("ell_init");
      f.ell_init_from_path = false;
    }
    FpRun r;
    if (sc.model == "pwm") {
      f.m1 = sc.get("m1");
      f.m2 = 1 - f.m1;
      f.x2_init = sc.get("x2");
      r = pwm_run(dw, f);
    } else {
      r = run(dw, f);
    }
    write_series_csv(file("series.csv"), r);
    if (!r.snapshots.empty()) {
      write_snapshots_csv(join(dir, "snapshots"), r);
      res.files.push_back(join(dir, "snapshots"));
    }
    const auto& last = r.series.back();
    summary << r.steps << " steps, " << masses(last.m_minus, last.m_plus) << ", sigma=" << last.sigma
            << ", max |moment-l|=" << r.max_constraint_error;
  } else if (sc.model == "tpm") {
    const double m1 = sc.get("m1");
    TwoPeaksState init{0, 0, m1, 1 - m1, c.t0};
    if (sc.has("x1")) {
      init.x1 = sc.get("x1");
      init.x2 = sc.get("x2");
    } else {
      auto q = qs_track(dw, m1, path.ell(c.t0));
      init.x1 = q.x1;
      init.x2 = q.x2;
    }
    TpmOptions o;
    o.abs_tol = sc.get("abs_tol");
    o.rel_tol = sc.get("rel_tol");
    o.sample_dt = sc.get("sample_dt");
    auto tr = tpm_integrate(init, dw, sc.get("tau"), path, c.t_end, o);
    write_tpm_csv(file("tpm.csv"), tr);
    summary << tr.steps << " steps";
    if (tr.merge_time) summary << ", merged at t=" << *tr.merge_time;
    if (tr.halted) summary << ", halted: " << tr.halt_reason;
  } else if (sc.model == "msm") {
    MsmOptions o;
    o.ds = sc.get("ds");
    o.s_max = sc.get("s_max");
    o.tol = sc.get("tol");
    o.richardson = sc.get("richardson") != 0;
    const double m1 = sc.get("m1"), sigma = sc.get("sigma");
    auto r = run_split(dw, m1, sigma, static_cast<std::size_t>(sc.get("N")), sc.get("eps"), o.s_max, o);
    CsvWriter w(file("msm.csv"), {"m1", "sigma_tilde", "m12", "m_right", "x_hat1", "x_hat2", "sigma_hat", "converged",
                                  "s_final", "constraint_drift", "richardson_diff"});
    w.num(m1).num(sigma).num(r.m12).num(r.m_right).num(r.x_hat1).num(r.x_hat2).num(r.sigma_hat);
    w.str(r.converged ? "1" : "0").num(r.s_final).num(r.constraint_drift).num(r.richardson_diff);
    w.end_row();
    summary << "m12=" << r.m12 << ", sigma_hat=" << r.sigma_hat << ", s=" << r.s_final;
  } else if (sc.model == "limit") {
    const std::string init = sc.opt("init");
    LimitState s;
    s.t = c.t0;
    s.m_minus = s.m_zero = s.m_plus = 0;
    const double m1 = sc.has("m1") ? sc.get("m1") : 1.0;
    if (init == "S_minus") s.m_minus = 1;
    if (init == "S_plus") s.m_plus = 1;
    if (init == "S_zero") s.m_zero = 1;
    if (init == "T_minus_plus") {
      s.m_minus = m1;
      s.m_plus = 1 - m1;
    }
    if (init == "T_zero_plus") {
      s.m_zero = m1;
      s.m_plus = 1 - m1;
    }
    if (init == "T_minus_zero") {
      s.m_zero = m1;
      s.m_minus = 1 - m1;
    }
    static const std::map<std::string, Configuration> cfg = {
        {"S_minus", Configuration::S_minus},           {"S_plus", Configuration::S_plus},
        {"S_zero", Configuration::S_zero},             {"T_minus_plus", Configuration::T_minus_plus},
        {"T_zero_plus", Configuration::T_zero_plus},   {"T_minus_zero", Configuration::T_minus_zero}};
    s.config = cfg.at(init);
    MProvider M;
    if (sc.options.count("m_table")) {
      M = table_M(std::make_shared<const MTable>(MTable::read_csv(sc.opt("m_table"))));
    } else {
      M = live_M(dw, static_cast<std::size_t>(sc.get("N")), sc.get("eps"));
    }
    LimitOptions o;
    o.scan_dt = sc.get("scan_dt");
    o.drop_mass = sc.get("drop_mass");
    auto tr = integrate(dw, sc.get("a"), path, s, c.t_end, M, o);
    write_limit_csv(file("limit.csv"), tr);
    write_event_json(file("events.json"), tr);
    std::map<std::string, int> counts;
    for (const auto& e : tr.events) counts[event_name(e.kind)]++;
    summary << tr.events.size() << " events (";
    bool first = true;
    for (const auto& [k, n] : counts) {
      summary << (first ? "" : ", ") << k << " " << n;
      first = false;
    }
    const auto& f = tr.final_state;
    summary << "), final " << config_name(f.config) << " " << masses(f.m_minus, f.m_plus);
  } else if (sc.model == "kramers") {
    KramersOptions o;
    o.sample_dt = sc.get("sample_dt");
    const double b = sc.get("b"), nu = sc.get("nu");
    auto series = constrained_kramers_ode(dw, b, nu, path, sc.get("m0"), c.t0, c.t_end, o);
    write_kramers_csv(file("kramers.csv"), series);
    auto lim = limit_trajectory(dw, b, path, c.t0, c.t_end);
    CsvWriter w(file("kramers_limit.csv"), {"t", "ell", "sigma", "m_minus", "m_plus", "E"});
    for (const auto& k : series) {
      auto st = limit_state(dw, lim, path, k.t);
      w.num(k.t).num(k.ell).num(st.sigma).num(st.m_minus).num(st.m_plus).num(st.E);
      w.end_row();
    }
    summary << "sigma_b=" << lim.sigma_b << ", D_b=" << lim.D_b << ", final "
            << masses(series.back().m_minus, series.back().m_plus);
  } else if (sc.model == "qs") {
    const double X = dw.X(Branch::Plus, 0.0);
    CsvWriter w(file("qs.csv"), {"t", "ell", "psi", "m_minus", "m_plus"});
    const double dt = sc.get("sample_dt");
    std::size_t n = 0;
    for (std::size_t k = 0;; ++k) {
      double t = c.t0 + static_cast<double>(k) * dt;
      if (t > c.t_end + 1e-12) break;
      double ell = path.ell(t);
      if (!(std::abs(ell) < X)) continue;
      auto q = qs_psi(dw, ell);
      w.num(t).num(ell).num(q.psi).num(q.m_minus).num(q.m_plus);
      w.end_row();
      ++n;
    }
    summary << n << " samples inside |l| < X+(0) = " << X;
  } else if (sc.model == "classify") {
    std::optional<double> a_crit;
    if (sc.has("a_crit")) a_crit = sc.get("a_crit");
    Regime r = classify_regime(sc.get("tau"), sc.get("nu"), dw.lm(), a_crit);
    CsvWriter w(file("classify.csv"), {"tau", "nu", "regime"});
    w.num(sc.get("tau")).num(sc.get("nu")).str(regime_name(r));
    w.end_row();
    summary << regime_name(r);
    if (r == Regime::Open) summary << " (no limit model)";
  } else if (sc.model == "tabulate-M") {
    MsmOptions o;
    o.ds = sc.get("ds");
    o.s_max = sc.get("s_max");
    o.tol = sc.get("tol");
    auto table = tabulate_M(dw, parse_grid(sc.opt("m1_grid"), "options.m1_grid"),
                            parse_grid(sc.opt("sigma_grid"), "options.sigma_grid"),
                            static_cast<std::size_t>(sc.get("N")), sc.get("eps"), workers, o);
    table.write_csv(file("M.csv"));
    std::size_t bad = 0;
    for (const auto& cell : table.cells()) bad += !cell.error.empty();
    summary << table.cells().size() << " cells, " << bad << " without a converged value";
  } else if (sc.model == "verify") {
    auto rep = verify_assumptions(dw.pot(), static_cast<int>(sc.get("n_samples")));
    std::ofstream out(file("verify.txt"));
    out << "evenness " << rep.evenness << "\nmonotone_branches " << rep.monotone_branches << "\nconcavity "
        << rep.concavity << "\n";
    for (const auto& f : rep.failures) out << f << "\n";
    out.close();
    if (!rep.ok()) {
      std::string all;
      for (const auto& f : rep.failures) all += (all.empty() ? "" : "; ") + f;
      throw DomainError("potential " + sc.potential + " fails: " + all);
    }
    summary << sc.potential << " satisfies evenness, monotone branches and concavity";
  }
  res.summary = summary.str();
  return res;
}

}  // namespace cfp
