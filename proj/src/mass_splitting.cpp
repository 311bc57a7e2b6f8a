#include "cfp/mass_splitting.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "cfp/csv.hpp"
#include "cfp/errors.hpp"

namespace cfp {

double default_eps(const DoubleWell& dw) { return 1e-3 * dw.lm().x_star; }

CharacteristicEnsemble init_ensemble(const DoubleWell& dw, double m1, double sigma_tilde, std::size_t N, double eps,
                                     PartnerSide side) {
  const double ss = dw.lm().sigma_star;
  if (!(std::abs(sigma_tilde) < ss)) throw DomainError("init_ensemble: |sigma_tilde| must be below sigma_*");
  if (!(m1 > 0 && m1 <= 1)) throw DomainError("init_ensemble: m1 must lie in (0, 1]");
  if (N < 2) throw DomainError("init_ensemble: need N >= 2");
  if (!(eps > 0)) throw DomainError("init_ensemble: eps must be positive");

  CharacteristicEnsemble e;
  e.m1 = m1;
  e.m2 = 1 - m1;
  const double x1 = dw.X(Branch::Zero, sigma_tilde);
  e.x2 = dw.X(side == PartnerSide::Right ? Branch::Plus : Branch::Minus, sigma_tilde);
  e.xi.resize(N);
  // midpoint quantiles of a Gaussian with variance 2 eps^2; erf_inv(2p - 1) = Phi^{-1}(p) / sqrt(2)
  for (std::size_t n = 0; n < N / 2; ++n) {
    double p = (static_cast<double>(n) + 0.5) / static_cast<double>(N);
    double q = 2 * eps * boost::math::erf_inv(2 * p - 1);
    e.xi[n] = x1 + q;
    e.xi[N - 1 - n] = x1 - q;
  }
  if (N % 2) e.xi[N / 2] = x1;
  double sum = 0;
  for (double v : e.xi) sum += v;
  e.ell = e.m1 * sum / static_cast<double>(N) + e.m2 * e.x2;
  return e;
}

double msm_sigma(const CharacteristicEnsemble& e, const Potential& pot) {
  double s = 0;
  for (double v : e.xi) s += pot.d1(v);
  return e.m1 * s / static_cast<double>(e.xi.size()) + e.m2 * pot.d1(e.x2);
}

void msm_step_inplace(CharacteristicEnsemble& e, const Potential& pot, double ds) {
  const double sigma = msm_sigma(e, pot);
  for (double& v : e.xi) v += ds * (sigma - pot.d1(v));
  e.x2 += ds * (sigma - pot.d1(e.x2));
  e.s += ds;
}

CharacteristicEnsemble msm_step(const CharacteristicEnsemble& ens, const Potential& pot, double ds) {
  CharacteristicEnsemble out = ens;
  msm_step_inplace(out, pot, ds);
  return out;
}

namespace {

MassSplitResult split_once(const DoubleWell& dw, double m1, double sigma_tilde, std::size_t N, double eps,
                           const MsmOptions& opt) {
  const Potential& pot = dw.pot();
  CharacteristicEnsemble e = init_ensemble(dw, m1, sigma_tilde, N, eps, opt.side);
  const double invN = 1.0 / static_cast<double>(N);
  MassSplitResult r;
  double sigma = msm_sigma(e, pot);
  const auto max_steps = static_cast<std::size_t>(std::ceil(opt.s_max / opt.ds));
  for (std::size_t k = 0; k <= max_steps; ++k) {
    double res = std::abs(sigma - pot.d1(e.x2));
    if (e.m2 == 0) res = 0;
    for (double v : e.xi) res = std::max(res, std::abs(sigma - pot.d1(v)));
    if (res < opt.tol) {
      r.converged = true;
      break;
    }
    if (k == max_steps) break;
    for (double& v : e.xi) v += opt.ds * (sigma - pot.d1(v));
    e.x2 += opt.ds * (sigma - pot.d1(e.x2));
    e.s += opt.ds;
    double sum = 0;
    for (double v : e.xi) sum += v;
    r.constraint_drift = std::max(r.constraint_drift, std::abs(e.m1 * sum * invN + e.m2 * e.x2 - e.ell));
    sigma = msm_sigma(e, pot);
  }
  r.s_final = e.s;
  r.sigma_hat = sigma;

  // basin boundary of the frozen final field
  double x0 = dw.in_domain(Branch::Zero, sigma) ? dw.X(Branch::Zero, sigma) : 0.0;
  std::size_t n_right = 0;
  double sum_l = 0, sum_r = 0;
  for (double v : e.xi) {
    if (v > x0) {
      ++n_right;
      sum_r += v;
    } else {
      sum_l += v;
    }
  }
  const std::size_t n_left = N - n_right;
  r.m_right = m1 * static_cast<double>(n_right) * invN;
  const bool right = opt.side == PartnerSide::Right;
  std::size_t n_join = right ? n_right : n_left;
  std::size_t n_stay = N - n_join;
  double sum_join = right ? sum_r : sum_l;
  double sum_stay = right ? sum_l : sum_r;
  r.n12 = n_join;
  r.m12 = m1 * static_cast<double>(n_join) * invN;
  // mass-weighted group means; the partner joins x_hat2
  double w_join = m1 * static_cast<double>(n_join) * invN + e.m2;
  r.x_hat2 = w_join > 0 ? (m1 * sum_join * invN + e.m2 * e.x2) / w_join : e.x2;
  r.x_hat1 = n_stay > 0 ? sum_stay / static_cast<double>(n_stay) : r.x_hat2;
  return r;
}

}  // namespace

MassSplitResult run_split(const DoubleWell& dw, double m1, double sigma_tilde, std::size_t N, double eps,
                          double s_max, const MsmOptions& opt_in) {
  MsmOptions opt = opt_in;
  opt.s_max = s_max;
  MassSplitResult r = split_once(dw, m1, sigma_tilde, N, eps, opt);
  if (!r.converged) {
    std::ostringstream os;
    os << "not converged: mass splitting at m1 = " << m1 << ", sigma = " << sigma_tilde << " reached s_max = " << s_max;
    throw Error(os.str());
  }
  if (opt.richardson) {
    MsmOptions half = opt;
    half.ds = opt.ds / 2;
    MassSplitResult r2 = split_once(dw, m1, sigma_tilde, N, eps, half);
    r.richardson_diff = std::abs(r.m12 - r2.m12);
  }
  return r;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n == 0) throw ValidationError("linspace: need at least one point");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

MTable::MTable(std::vector<double> m1_grid, std::vector<double> sigma_grid, std::vector<MTableCell> cells)
    : m1_(std::move(m1_grid)), sigma_(std::move(sigma_grid)), cells_(std::move(cells)) {
  if (cells_.size() != m1_.size() * sigma_.size()) throw Error("MTable: cell count does not match the grid");
  if (!std::is_sorted(m1_.begin(), m1_.end()) || !std::is_sorted(sigma_.begin(), sigma_.end()))
    throw Error("MTable: grids must be sorted");
}

double MTable::interpolate(double m1, double sigma) const {
  if (m1_.empty() || sigma_.empty()) throw Error("M lookup failed: empty table");
  if (sigma < sigma_.front() - 1e-12 || sigma > sigma_.back() + 1e-12 || m1 > m1_.back() + 1e-12) {
    std::ostringstream os;
    os << "M lookup failed: (m1 = " << m1 << ", sigma = " << sigma << ") outside the table";
    throw Error(os.str());
  }
  auto locate = [](const std::vector<double>& g, double v) -> std::pair<std::size_t, double> {
    if (g.size() == 1) return {0, 0.0};
    auto it = std::upper_bound(g.begin(), g.end(), v);
    std::size_t i = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
    i = std::min(i, g.size() - 2);
    double w = (v - g[i]) / (g[i + 1] - g[i]);
    return {i, std::clamp(w, 0.0, 1.0)};
  };
  auto value = [&](std::size_t i, std::size_t j) {
    const auto& c = at(i, j);
    if (!c.error.empty() || !c.result.converged) throw Error("M lookup failed: table cell without a converged value");
    return c.result.m12;
  };
  auto along_sigma = [&](std::size_t i) {
    auto [j, w] = locate(sigma_, sigma);
    if (sigma_.size() == 1) return value(i, 0);
    return (1 - w) * value(i, j) + w * value(i, j + 1);
  };
  if (m1 <= m1_.front()) return m1_.front() > 0 ? along_sigma(0) * m1 / m1_.front() : along_sigma(0);
  auto [i, w] = locate(m1_, m1);
  if (m1_.size() == 1) return along_sigma(0);
  return (1 - w) * along_sigma(i) + w * along_sigma(i + 1);
}

void MTable::write_csv(const std::string& path) const {
  CsvWriter w(path, {"m1", "sigma_tilde", "m12", "x_hat1", "x_hat2", "sigma_hat", "converged", "error"});
  for (const auto& c : cells_) {
    w.num(c.m1).num(c.sigma).num(c.result.m12).num(c.result.x_hat1).num(c.result.x_hat2).num(c.result.sigma_hat);
    w.str(c.result.converged ? "1" : "0").str(c.error.empty() ? "" : "\"" + c.error + "\"");
    w.end_row();
  }
}

MTable MTable::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read M table " + path);
  std::string line;
  std::getline(in, line);
  std::map<std::pair<double, double>, MTableCell> byKey;
  std::vector<double> m1s, sigmas;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() < 7) throw ValidationError("M table " + path + ": malformed row '" + line + "'");
    MTableCell c;
    c.m1 = std::stod(fields[0]);
    c.sigma = std::stod(fields[1]);
    c.result.m12 = std::stod(fields[2]);
    c.result.x_hat1 = std::stod(fields[3]);
    c.result.x_hat2 = std::stod(fields[4]);
    c.result.sigma_hat = std::stod(fields[5]);
    c.result.converged = fields[6] == "1";
    if (fields.size() > 7) c.error = fields[7];
    m1s.push_back(c.m1);
    sigmas.push_back(c.sigma);
    byKey[{c.m1, c.sigma}] = c;
  }
  auto uniq = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  m1s = uniq(m1s);
  sigmas = uniq(sigmas);
  std::vector<MTableCell> cells;
  for (double m : m1s)
    for (double s : sigmas) {
      auto it = byKey.find({m, s});
      if (it == byKey.end()) throw ValidationError("M table " + path + ": grid is not rectangular");
      cells.push_back(it->second);
    }
  return MTable(m1s, sigmas, cells);
}

MTable tabulate_M(const DoubleWell& dw, const std::vector<double>& m1_grid, const std::vector<double>& sigma_grid,
                  std::size_t N, double eps, unsigned workers, const MsmOptions& opt) {
  std::vector<MTableCell> cells(m1_grid.size() * sigma_grid.size());
  for (std::size_t i = 0; i < m1_grid.size(); ++i)
    for (std::size_t j = 0; j < sigma_grid.size(); ++j) {
      cells[i * sigma_grid.size() + j].m1 = m1_grid[i];
      cells[i * sigma_grid.size() + j].sigma = sigma_grid[j];
    }
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      auto& c = cells[k];
      try {
        c.result = split_once(dw, c.m1, c.sigma, N, eps, opt);
        if (!c.result.converged) c.error = "not converged";
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  workers = std::max(1u, workers);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return MTable(m1_grid, sigma_grid, std::move(cells));
}

}  // namespace cfp
