#pragma once

#include <functional>
#include <optional>

#include "cfp/potential.hpp"

namespace cfp {

using PathFn = std::function<double(double)>;

struct WidthState {
  double phi = 0;
  double w2 = 0;
  double t = 0;
};

// phi(t) = int_{t1}^{t} H''(x1(s)) ds
double phi_of_t(const PathFn& x1_path, const Potential& pot, double t1, double t);

// squared width of an unstable peak, evaluated in log domain; log_width_squared avoids overflow
double log_width_squared(const PathFn& x1_path, const Potential& pot, double tau, double a, double t0, double t1,
                         double t);
double width_squared(const PathFn& x1_path, const Potential& pot, double tau, double a, double t0, double t1,
                     double t);
WidthState width_state(const PathFn& x1_path, const Potential& pot, double tau, double a, double t0, double t1,
                       double t);

// first root of phi(t) + a on (t1, t3)
std::optional<double> splitting_time(const PathFn& x1_path, const DoubleWell& dw, double a, double t1, double t3);

double beta_at(const DoubleWell& dw, double x1);

}  // namespace cfp
