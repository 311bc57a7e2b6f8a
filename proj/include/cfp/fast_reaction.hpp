#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfp/path.hpp"
#include "cfp/potential.hpp"

namespace cfp {

// h_-(sigma_b) = b
double sigma_b(const DoubleWell& dw, double b);

struct Rates {
  double r_minus = 0;
  double r_plus = 0;
  double log_r_minus = 0;
  double log_r_plus = 0;
};
// escape rates per unit slow time, tau = exp(-b / nu^2)
Rates kramers_rates(const DoubleWell& dw, double sigma, double b, double nu);

// net barrier flux from left to right per unit fast time
double flux_general(const DoubleWell& dw, double m_minus, double m_plus, double sigma, double nu);

double spinodal_gamma(const DoubleWell& dw);  // -H'''(-x_*)

struct Case2Flux {
  double R = 0;
  double window = 0;       // (sigma_* - sigma)^{3/2} / nu^2
  bool in_window = false;  // window >= 5
  std::string warning;
};
Case2Flux case2_flux(const DoubleWell& dw, double sigma, double nu, double m_minus);

// large root K of P K exp(-c K^3) = tau nu^{-2/3}, with the same prefactor P as case2_flux
double solve_K(const DoubleWell& dw, double tau, double nu);

struct KramersSample {
  double t, ell, sigma, psi, m_minus, m_plus, E;
};

struct KramersOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  double first_step = 1e-4;
  double sample_dt = 1e-3;
  double m_min = 1e-10;  // below this the left peak is dropped and the single-peak law takes over
};

// validation model: two quasi-stationary peaks exchanging mass at Kramers rates under the constraint
std::vector<KramersSample> constrained_kramers_ode(const DoubleWell& dw, double b, double nu,
                                                   const ConstraintPath& path, double m0, double t0, double t_end,
                                                   const KramersOptions& opt = {});

struct FastLimit {
  double sigma_b = 0;
  double x_minus = 0;  // X-(sigma_b)
  double x_plus = 0;   // X+(sigma_b)
  double t1 = 0;
  double t2 = 0;
  double D_b = 0;
};

struct FastLimitState {
  double sigma, m_minus, m_plus, x_minus, x_plus, E;
};

double dissipation_b(const DoubleWell& dw, double sigma_b);

// sigma_b from b; b >= h_crit selects sigma_b = 0
FastLimit limit_trajectory(const DoubleWell& dw, double b, const ConstraintPath& path, double t0, double t_end);
// explicit plateau value, e.g. sigma_* for the limiting case
FastLimit limit_trajectory_at(const DoubleWell& dw, double sigma_b, const ConstraintPath& path, double t0,
                              double t_end);
FastLimitState limit_state(const DoubleWell& dw, const FastLimit& lim, const ConstraintPath& path, double t);

struct QsPsi {
  double psi, m_minus, m_plus;
};
QsPsi qs_psi(const DoubleWell& dw, double ell);

enum class Regime { SlowI, SlowII, Open, FastLimiting, FastKramers, FastIV };
const char* regime_name(Regime r);

// a_crit separates slow-I from slow-II and must be supplied for slow scalings
Regime classify_regime(double tau, double nu, const Landmarks& lm, std::optional<double> a_crit = std::nullopt);
// throws for regimes without a limit model
void require_limit_model(Regime r);

void write_kramers_csv(const std::string& path, const std::vector<KramersSample>& s);

}  // namespace cfp
