#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfp/path.hpp"
#include "cfp/potential.hpp"

namespace cfp {

struct TwoPeaksState {
  double x1 = 0;
  double x2 = 0;
  double m1 = 1;
  double m2 = 0;
  double t = 0;
};

struct QSPoint {
  double x1 = 0;
  double x2 = 0;
  double sigma = 0;
  Branch b1 = Branch::Minus;
  Branch b2 = Branch::Plus;
};

struct TpmSample {
  double t, x1, x2, sigma, E, D;
};

struct TpmOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double sample_dt = 0;  // 0 records every accepted step
  double min_step = 1e-13;
  double merge_gap = 1e-6;
};

struct TpmTrajectory {
  std::vector<TpmSample> samples;
  HermiteCurve x1_curve;  // dense representation over accepted steps
  HermiteCurve x2_curve;
  std::optional<double> merge_time;  // first time with x2 - x1 below merge_gap
  bool halted = false;
  double halt_time = 0;
  std::string halt_reason;
  double energy_residual = 0;  // sum of |dE + int D - int sigma l'| over steps
  std::size_t steps = 0;
};

TpmTrajectory tpm_integrate(const TwoPeaksState& init, const DoubleWell& dw, double tau,
                            const ConstraintPath& path, double t_end, const TpmOptions& opt = {});

QSPoint qs_solve(const DoubleWell& dw, double m1, double ell, Branch b1, Branch b2);

// quasi-stationary state along an increasing constraint: (Minus, Plus) up to the corner
// l = -m1 x_* + m2 x_**, (Zero, Plus) after it
QSPoint qs_track(const DoubleWell& dw, double m1, double ell);

// Z(sigma) = m1 H''(X+(sigma)) + m2 H''(X0(sigma))
double tangency_function(const DoubleWell& dw, double m1, double sigma);
std::optional<double> tangency(const DoubleWell& dw, double m1);

double linear_decay_rate(const DoubleWell& dw, const QSPoint& qs, double m1);

void write_tpm_csv(const std::string& path, const TpmTrajectory& tr);

}  // namespace cfp
