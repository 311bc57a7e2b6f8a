#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cfp/path.hpp"

namespace cfp {

struct ConstraintSpec {
  std::string kind = "linear";  // linear | piecewise
  double c0 = 0;
  double c1 = 1;
  std::vector<std::pair<double, double>> points;
  double t0 = 0;
  double t_end = 1;
  std::string monotone;  // increasing | decreasing | none; empty derives it from the data

  ConstraintPath path() const;
  bool operator==(const ConstraintSpec&) const = default;
};

struct Scenario {
  std::string model;
  std::string potential = "quartic";
  ConstraintSpec constraint;
  std::map<std::string, double> params;        // numeric parameters, defaults filled
  std::map<std::string, std::string> options;  // init, m_table, m1_grid, sigma_grid

  double get(const std::string& key) const;
  bool has(const std::string& key) const { return params.count(key) > 0; }
  std::string opt(const std::string& key, const std::string& fallback = "") const;
  bool operator==(const Scenario&) const = default;
};

const std::vector<std::string>& known_models();

// origin names the source in error messages
Scenario parse_scenario_string(const std::string& text, const std::string& origin = "<string>");
Scenario parse_scenario(const std::string& path);
std::string preset_text(const std::string& name);
Scenario preset(const std::string& name);

// effective configuration, re-parses to the same Scenario
std::string to_ini(const Scenario& sc);

// "a:b:n" grids
std::vector<double> parse_grid(const std::string& spec, const std::string& what);

struct DispatchResult {
  std::string summary;
  std::vector<std::string> files;
};

DispatchResult dispatch(const Scenario& sc, const std::string& out_dir, unsigned workers = 1);

}  // namespace cfp
