#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cfp/path.hpp"
#include "cfp/potential.hpp"

namespace cfp {

struct Grid {
  double x_lo = -1;
  double x_hi = 1;
  std::size_t n_cells = 2;

  double dx() const { return (x_hi - x_lo) / static_cast<double>(n_cells); }
  double center(std::size_t i) const { return x_lo + (static_cast<double>(i) + 0.5) * dx(); }

  static Grid symmetric(double half_width, std::size_t n_cells);
  // default truncation and resolution for a given noise level; dx_max <= 0 means nu/4
  static Grid for_model(const DoubleWell& dw, double nu, double dx_max = 0);
};

struct DensityField {
  Grid grid;
  std::vector<double> values;
  double t = 0;

  double mass() const;
  double moment() const;
  double variance() const;
};

struct Observables {
  double t = 0;
  double ell = 0;       // prescribed l(t)
  double ell_hat = 0;   // first moment of the grid density
  double y = 0;         // mean force
  double m_minus = 0;
  double m_plus = 0;
  double E = 0;
  double H_int = 0;
  double S = 0;
  double D = 0;
  double sigma = 0;
  double width = 0;
};

DensityField init_gaussian(const DoubleWell& dw, double ell0, double nu, const Grid& grid);
double multiplier(const DensityField& rho, const Potential& pot, double tau, double ell_dot);
DensityField equilibrium(const Potential& pot, double sigma, double nu, const Grid& grid);

// Crank–Nicolson stepper with exponentially fitted fluxes. The multiplier is held fixed
// over a step and chosen so that m1*moment + m2*x2 hits the target after the step.
class FokkerPlanckStepper {
 public:
  FokkerPlanckStepper(const Potential& pot, const Grid& grid, double nu, double tau);

  struct PointPeak {
    double m1 = 1;
    double m2 = 0;
    double x2 = 0;
  };

  // returns the multiplier used; rho (and peak->x2) are advanced in place
  double step(DensityField& rho, double dt, double ell_target, double sigma_guess,
              PointPeak* peak = nullptr) const;

  // advective bound 0.5*tau*dx/max|H'-sigma| and diffusive positivity bound, on the support
  double max_dt(const DensityField& rho, double sigma) const;

  double dissipation(const DensityField& rho, double sigma) const;
  Observables observe(const DensityField& rho, double sigma, double ell) const;

  const Grid& grid() const { return grid_; }

 private:
  void coefficients(double sigma, std::vector<double>& a, std::vector<double>& c,
                    std::vector<double>* da, std::vector<double>* dc) const;

  const Potential& pot_;
  Grid grid_;
  double nu_;
  double tau_;
  std::vector<double> x_;
  std::vector<double> H_;
  std::vector<double> dH_;   // H' at centers
  std::vector<double> dHf_;  // H(x_{i+1}) - H(x_i)
};

// single step through a temporary stepper; dt is checked against max_dt
DensityField step(const DensityField& rho, const Potential& pot, double nu, double tau,
                  const ConstraintPath& path, double dt);

struct FpScenario {
  double nu = 0.05;
  double tau = 0.05;
  ConstraintPath path;
  double t0 = 0;
  double t_end = 1;
  Grid grid;
  double dt = 0;       // fixed step; 0 selects cfl * bound each step
  double cfl = 0.5;    // fraction of the advective bound when dt == 0
  double sample_every = 0;    // 0 records every step
  double snapshot_every = 0;  // 0 disables snapshots
  double ell_init = 0;        // centre of the initial Gaussian
  bool ell_init_from_path = true;
  // point peak (pwm_run); m2 = 0 reproduces run()
  double m1 = 1;
  double m2 = 0;
  double x2_init = 0;
};

struct FpRun {
  std::vector<Observables> series;
  std::vector<double> x2;      // point-peak position per series entry (pwm)
  std::vector<DensityField> snapshots;
  double energy_residual = 0;  // sum over steps of |dE + dt*avg(D) - sigma*dl|
  double max_mass_error = 0;
  double max_constraint_error = 0;
  double min_rho = 0;
  std::size_t steps = 0;
  DensityField final_density;
};

FpRun run(const DoubleWell& dw, const FpScenario& sc);
FpRun pwm_run(const DoubleWell& dw, const FpScenario& sc);

void write_series_csv(const std::string& path, const FpRun& r);
void write_snapshots_csv(const std::string& dir, const FpRun& r);

}  // namespace cfp
