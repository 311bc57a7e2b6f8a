#pragma once

#include <functional>
#include <string>
#include <vector>

namespace cfp {

enum class Branch { Minus, Zero, Plus };

const char* branch_name(Branch b);

// Even double-well potential given in closed form with derivatives up to third order.
struct Potential {
  std::string name;
  std::function<double(double)> eval;
  std::function<double(double)> d1;
  std::function<double(double)> d2;
  std::function<double(double)> d3;

  static Potential quartic();       // (x^2-1)^2
  static Potential arctan_model();  // H' = x - 2 atan(x)
  static Potential by_name(const std::string& name);
  Potential negated() const;
};

struct Landmarks {
  double x_star = 0;
  double x_starstar = 0;
  double sigma_star = 0;
  double h_crit = 0;
  double h_star = 0;
};

// x_scan <= 0 selects the scan bound automatically.
Landmarks landmarks(const Potential& pot, double x_scan = 0);

// Potential bundled with its landmarks; every reduced model works on this.
class DoubleWell {
 public:
  explicit DoubleWell(Potential pot);

  const Potential& pot() const { return pot_; }
  const Landmarks& lm() const { return lm_; }
  const std::string& name() const { return pot_.name; }

  double H(double x) const { return pot_.eval(x); }
  double dH(double x) const { return pot_.d1(x); }
  double d2H(double x) const { return pot_.d2(x); }
  double d3H(double x) const { return pot_.d3(x); }

  double X(Branch b, double sigma) const;
  // H''(X_b(sigma)), signed
  double A(Branch b, double sigma) const { return d2H(X(b, sigma)); }
  bool in_domain(Branch b, double sigma) const;

 private:
  Potential pot_;
  Landmarks lm_;
};

double branch_inverse(const DoubleWell& dw, Branch b, double sigma);

struct BarrierHeights {
  double h_minus;
  double h_plus;
};
BarrierHeights barrier_heights(const DoubleWell& dw, double sigma);

struct Curvatures {
  double alpha_minus;
  double alpha_zero;
  double alpha_plus;
};
Curvatures curvatures(const DoubleWell& dw, double sigma);

struct AssumptionReport {
  bool evenness = false;
  bool monotone_branches = false;
  bool concavity = false;
  std::vector<std::string> failures;
  bool ok() const { return evenness && monotone_branches && concavity; }
};
AssumptionReport verify_assumptions(const Potential& pot, int n_samples);

}  // namespace cfp
