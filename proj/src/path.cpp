#include "cfp/path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfp/errors.hpp"

namespace cfp {

ConstraintPath::ConstraintPath(std::function<double(double)> ell, std::function<double(double)> ell_dot)
    : ell_(std::move(ell)), ell_dot_(std::move(ell_dot)) {}

ConstraintPath ConstraintPath::linear(double c0, double c1) {
  return ConstraintPath([=](double t) { return c0 + c1 * t; }, [=](double) { return c1; });
}

ConstraintPath ConstraintPath::piecewise_linear(std::vector<std::pair<double, double>> pts) {
  if (pts.size() < 2) throw ValidationError("piecewise-linear constraint needs at least two breakpoints");
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i].first > pts[i - 1].first))
      throw ValidationError("piecewise-linear breakpoints must have strictly increasing t");
  auto seg = [pts](double t) {
    auto it = std::upper_bound(pts.begin(), pts.end(), t,
                               [](double v, const std::pair<double, double>& p) { return v < p.first; });
    std::size_t i = static_cast<std::size_t>(it - pts.begin());
    if (i == 0) i = 1;
    if (i >= pts.size()) i = pts.size() - 1;
    return i;
  };
  auto slope = [pts](std::size_t i) {
    return (pts[i].second - pts[i - 1].second) / (pts[i].first - pts[i - 1].first);
  };
  return ConstraintPath(
      [pts, seg, slope](double t) {
        std::size_t i = seg(t);
        return pts[i - 1].second + slope(i) * (t - pts[i - 1].first);
      },
      [seg, slope](double t) { return slope(seg(t)); });
}

std::pair<double, double> ConstraintPath::rate_bounds(double t0, double t1, int n) const {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i <= n; ++i) {
    double r = ell_dot(t0 + (t1 - t0) * i / n);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {lo, hi};
}

bool ConstraintPath::is_monotone(double t0, double t1) const {
  auto [c, C] = rate_bounds(t0, t1);
  return c > 0 && std::isfinite(C);
}

void HermiteCurve::push(double t, double x, double dxdt) {
  if (!t_.empty() && !(t > t_.back())) throw Error("HermiteCurve: nodes must be strictly increasing");
  t_.push_back(t);
  x_.push_back(x);
  v_.push_back(dxdt);
}

std::size_t HermiteCurve::segment(double t) const {
  if (t_.size() < 2) throw Error("HermiteCurve: need at least two nodes");
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  std::size_t i = static_cast<std::size_t>(it - t_.begin());
  if (i == 0) i = 1;
  if (i >= t_.size()) i = t_.size() - 1;
  return i - 1;
}

double HermiteCurve::operator()(double t) const {
  std::size_t i = segment(t);
  double h = t_[i + 1] - t_[i];
  double s = (t - t_[i]) / h;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * x_[i] + h10 * h * v_[i] + h01 * x_[i + 1] + h11 * h * v_[i + 1];
}

double HermiteCurve::derivative(double t) const {
  std::size_t i = segment(t);
  double h = t_[i + 1] - t_[i];
  double s = (t - t_[i]) / h;
  double s2 = s * s;
  double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1, d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
  return (d00 * x_[i] + d01 * x_[i + 1]) / h + d10 * v_[i] + d11 * v_[i + 1];
}

}  // namespace cfp
