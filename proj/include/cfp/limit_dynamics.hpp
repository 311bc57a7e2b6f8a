#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfp/mass_splitting.hpp"
#include "cfp/path.hpp"
#include "cfp/potential.hpp"

namespace cfp {

enum class Configuration { S_minus, S_zero, S_plus, T_minus_plus, T_minus_zero, T_zero_plus };
enum class EventKind { Switching, InverseSwitching, Splitting, MergingContinuous, MergingDiscontinuous };

const char* config_name(Configuration c);
const char* event_name(EventKind k);
bool is_merging(EventKind k);

struct LimitState {
  Configuration config = Configuration::S_minus;
  double m_minus = 1;
  double m_zero = 0;
  double m_plus = 0;
  double sigma = 0;
  double phi = 0;
  double t = 0;
  // side through which the unstable branch was entered: +1 at +sigma_*, -1 at -sigma_*, 0 unknown
  int entry = 0;
};

struct EventRecord {
  double t = 0;
  EventKind kind = EventKind::Switching;
  LimitState pre, post;
  double d_sigma = 0;
  double d_E = 0;
  bool energy_ok = true;  // d_E <= 0 where the jump rules require it
};

// mass of the unstable peak (m1) that joins its stable partner on the right at force sigma
using MProvider = std::function<double(double m1, double sigma)>;
MProvider live_M(const DoubleWell& dw, std::size_t N, double eps, MsmOptions opt = {});
MProvider table_M(std::shared_ptr<const MTable> table);

// peak positions and derived quantities
double state_ell(const DoubleWell& dw, const LimitState& s);
double state_energy(const DoubleWell& dw, const LimitState& s);
// throws DomainError naming the violated membership condition
void validate_state(const DoubleWell& dw, const LimitState& s, double a);

struct LimitRhs {
  double dsigma = 0;
  double dphi = 0;
};
LimitRhs regular_rhs(const DoubleWell& dw, const LimitState& s, double ell_dot);

// event whose boundary condition is active and is being crossed outward for the given rate
std::optional<EventKind> detect_event(const DoubleWell& dw, const LimitState& s, double a, double ell_dot,
                                      double tol = 1e-9);

// jump rules; rec (optional) receives the energy and force jumps
LimitState apply_jump(const DoubleWell& dw, const LimitState& pre, EventKind kind, const MProvider& M,
                      EventRecord* rec = nullptr, double drop_mass = 1e-9);

struct LimitSample {
  double t, ell;
  Configuration config;
  double m_minus, m_zero, m_plus, sigma, phi, E;
};

struct LimitOptions {
  double scan_dt = 1e-3;     // sampling and bracketing step in t
  double t_tol = 1e-12;      // event localization tolerance in t
  std::size_t max_events = 10000;
  double drop_mass = 1e-9;   // masses below this are removed after splitting
};

struct LimitTrajectory {
  std::vector<LimitSample> samples;
  std::vector<EventRecord> events;
  LimitState final_state;
};

// init.sigma is recomputed from the constraint at init.t
LimitTrajectory integrate(const DoubleWell& dw, double a, const ConstraintPath& path, const LimitState& init,
                          double t_end, const MProvider& M, const LimitOptions& opt = {});

struct NextEvent {
  EventKind kind = EventKind::Splitting;
  double sigma_ev = 0;
  double dt = 0;        // quadrature of the time integral
  double dt_check = 0;  // same quantity from the constraint difference
};

// after a switching into the unstable-stable leg with unstable mass m1 and stable mass m2
NextEvent next_event_constant_rate(const DoubleWell& dw, double m1, double m2, double a, double ell_dot);

void write_limit_csv(const std::string& path, const LimitTrajectory& tr);
void write_event_json(const std::string& path, const LimitTrajectory& tr);

}  // namespace cfp
