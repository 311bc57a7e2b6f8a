#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cfp/potential.hpp"

namespace cfp {

struct CharacteristicEnsemble {
  std::vector<double> xi;
  double x2 = 0;
  double m1 = 1;
  double m2 = 0;
  double s = 0;
  double ell = 0;
};

struct MassSplitResult {
  double m12 = 0;      // mass that joins the stable partner
  double m_right = 0;  // mass ending right of X0(sigma_hat)
  double x_hat1 = 0;   // remnant of the unstable peak
  double x_hat2 = 0;   // partner side
  double sigma_hat = 0;
  std::size_t n12 = 0;  // number of characteristics joining the partner
  bool converged = false;
  double s_final = 0;
  double constraint_drift = 0;
  double richardson_diff = 0;  // |m12(ds) - m12(ds/2)| when requested
};

// Right: stable partner on the right (unstable peak entering from the left well).
// Left: mirrored set-up with the partner at X-(sigma).
enum class PartnerSide { Right, Left };

struct MsmOptions {
  double ds = 1e-3;
  double s_max = 200;
  double tol = 1e-8;
  bool richardson = false;
  PartnerSide side = PartnerSide::Right;
};

CharacteristicEnsemble init_ensemble(const DoubleWell& dw, double m1, double sigma_tilde, std::size_t N, double eps,
                                     PartnerSide side = PartnerSide::Right);
double msm_sigma(const CharacteristicEnsemble& ens, const Potential& pot);
CharacteristicEnsemble msm_step(const CharacteristicEnsemble& ens, const Potential& pot, double ds);
void msm_step_inplace(CharacteristicEnsemble& ens, const Potential& pot, double ds);

MassSplitResult run_split(const DoubleWell& dw, double m1, double sigma_tilde, std::size_t N, double eps,
                          double s_max = 200, const MsmOptions& opt = {});
double default_eps(const DoubleWell& dw);

struct MTableCell {
  double m1 = 0;
  double sigma = 0;
  MassSplitResult result;
  std::string error;
};

class MTable {
 public:
  MTable() = default;
  MTable(std::vector<double> m1_grid, std::vector<double> sigma_grid, std::vector<MTableCell> cells);

  const std::vector<double>& m1_grid() const { return m1_; }
  const std::vector<double>& sigma_grid() const { return sigma_; }
  const std::vector<MTableCell>& cells() const { return cells_; }
  const MTableCell& at(std::size_t i_m1, std::size_t j_sigma) const { return cells_[i_m1 * sigma_.size() + j_sigma]; }

  // bilinear in (m1, sigma); m1 below the first node scales linearly to M(0, .) = 0
  double interpolate(double m1, double sigma) const;

  void write_csv(const std::string& path) const;
  static MTable read_csv(const std::string& path);

 private:
  std::vector<double> m1_, sigma_;
  std::vector<MTableCell> cells_;
};

MTable tabulate_M(const DoubleWell& dw, const std::vector<double>& m1_grid, const std::vector<double>& sigma_grid,
                  std::size_t N, double eps, unsigned workers = 1, const MsmOptions& opt = {});

// linspace helper for "a:b:n" grids
std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace cfp
