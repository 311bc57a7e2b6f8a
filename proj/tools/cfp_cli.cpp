#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "cfp/errors.hpp"
#include "cfp/scenario.hpp"

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_scenario(const cfp::Scenario& sc, const std::string& out, unsigned workers) {
  auto t0 = std::chrono::steady_clock::now();
  auto res = cfp::dispatch(sc, out, workers);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s (wall %.2f s)\n", res.summary.c_str(), wall);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Fokker-Planck phase transitions: solvers and limit models"};
  app.require_subcommand(1);

  std::string scenario_path, preset_name, out = "out";
  unsigned workers = 1;
  auto* run = app.add_subcommand("run", "run a scenario file or a shipped preset");
  auto* o_sc = run->add_option("--scenario", scenario_path, "scenario file");
  auto* o_pr = run->add_option("--preset", preset_name, "shipped preset name (fig2)");
  o_sc->excludes(o_pr);
  run->add_option("--out", out, "output directory");
  run->add_option("--workers", workers, "worker threads");

  std::string m1_grid, sigma_grid, potential = "quartic";
  double N = 2000;
  std::optional<double> eps;
  auto* tab = app.add_subcommand("tabulate-M", "tabulate the mass splitting function");
  tab->add_option("--m1", m1_grid, "m1 grid a:b:n")->required();
  tab->add_option("--sigma", sigma_grid, "sigma grid a:b:n")->required();
  tab->add_option("--potential", potential, "quartic or arctan");
  tab->add_option("--N", N, "characteristics per cell");
  tab->add_option("--eps", eps, "initial spread");
  tab->add_option("--out", out, "output directory");
  tab->add_option("--workers", workers, "worker threads");

  double tau = 0, nu = 0;
  std::optional<double> a_crit;
  auto* cls = app.add_subcommand("classify", "scaling regime of (tau, nu)");
  cls->add_option("--tau", tau, "relaxation time")->required();
  cls->add_option("--nu", nu, "noise amplitude")->required();
  cls->add_option("--a-crit", a_crit, "slow-regime threshold a_crit");
  cls->add_option("--potential", potential, "quartic or arctan");
  cls->add_option("--out", out, "output directory");

  auto* ver = app.add_subcommand("verify-potential", "check evenness, monotone branches and concavity");
  ver->add_option("--potential", potential, "quartic or arctan");
  ver->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      if (scenario_path.empty() && preset_name.empty()) throw cfp::ValidationError("run: give --scenario or --preset");
      auto sc = scenario_path.empty() ? cfp::preset(preset_name) : cfp::parse_scenario(scenario_path);
      return run_scenario(sc, out, workers);
    }
    std::ostringstream ini;
    ini << "[scenario]\npotential = " << potential << "\n";
    if (*tab) {
      ini << "model = tabulate-M\n[params]\nN = " << num(N) << "\n";
      if (eps) ini << "eps = " << num(*eps) << "\n";
      ini << "[options]\nm1_grid = " << m1_grid << "\nsigma_grid = " << sigma_grid << "\n";
    } else if (*cls) {
      ini << "model = classify\n[params]\ntau = " << num(tau) << "\nnu = " << num(nu) << "\n";
      if (a_crit) ini << "a_crit = " << num(*a_crit) << "\n";
    } else {
      ini << "model = verify\n";
    }
    return run_scenario(cfp::parse_scenario_string(ini.str(), app.get_subcommands().front()->get_name()), out,
                        workers);
  } catch (const cfp::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
