#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace cfp {

// Prescribed first moment l(t) and its rate.
class ConstraintPath {
 public:
  ConstraintPath() = default;
  ConstraintPath(std::function<double(double)> ell, std::function<double(double)> ell_dot);

  static ConstraintPath linear(double c0, double c1);
  // breakpoints (t, l) sorted by t; constant extrapolation of the end slopes
  static ConstraintPath piecewise_linear(std::vector<std::pair<double, double>> points);

  double ell(double t) const { return ell_(t); }
  double ell_dot(double t) const { return ell_dot_(t); }

  // rate bounds [c, C] on [t0, t1] from sampling; used for the monotone flag
  std::pair<double, double> rate_bounds(double t0, double t1, int n = 1000) const;
  bool is_monotone(double t0, double t1) const;

 private:
  std::function<double(double)> ell_;
  std::function<double(double)> ell_dot_;
};

// C1 piecewise cubic Hermite interpolant through (t_i, x_i, x'_i).
class HermiteCurve {
 public:
  void push(double t, double x, double dxdt);
  double operator()(double t) const;
  double derivative(double t) const;
  double t_front() const { return t_.front(); }
  double t_back() const { return t_.back(); }
  std::size_t size() const { return t_.size(); }

 private:
  std::size_t segment(double t) const;
  std::vector<double> t_, x_, v_;
};

}  // namespace cfp
