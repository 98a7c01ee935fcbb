#pragma once

// Dual quantities sandwiching the typical-random-code exponents of the ML and
// MMI decoders: the Chernoff-type Psi and Theta (an upper bound under ML) and
// the Lagrangian Lambda and Phi (a lower bound under MMI), plus a report that
// checks the chain E_ML <= ml_upper <= mmi_lower <= E_MMI numerically.

#include <cstddef>
#include <string>
#include <vector>

#include "explab/exponents.hpp"
#include "explab/prob.hpp"

namespace explab {

// (sum_x W(y|x)^{1/sigma} Q(x)^{tau/sigma} V(x)^{-tau/sigma})^sigma, evaluated in
// the log domain. sigma = 0 is the max-term limit; sigma = +inf is +inf unless a
// single term is positive, in which case it is that term's base W (Q/V)^tau.
// Throws when V vanishes on a symbol where Q_X W(y|.) is positive and tau > 0.
double g_aux(std::size_t y, double sigma, double tau, const Dist& v, const Channel& ch,
             const Dist& q_x);
double log_g_aux(std::size_t y, double sigma, double tau, const Dist& v, const Channel& ch,
                 const Dist& q_x);
// min over V of G(y, sigma, tau, V), attained at V(x) proportional to
// W(y|x)^{1/(sigma+tau)} Q(x)^{tau/(sigma+tau)}:
// (sum_x W(y|x)^{1/(sigma+tau)} Q(x)^{tau/(sigma+tau)})^{sigma+tau}.
double log_g_aux_min(std::size_t y, double sigma, double tau, const Channel& ch, const Dist& q_x);

struct DualParams {
  double rho = 0.0, sigma = 0.0, tau = 0.0, mu = 0.0, s = 0.0;
  CondDist v;  // Theta: minimizing V(.|y), one row per output symbol
  CondDist q_y_given_pair;  // Lambda / Phi: inner minimizer at the optimal mu
};

struct DualValue {
  double value = 0.0;
  bool unbounded = false;
  std::string reason;
  DualParams params;
  std::size_t evaluations = 0;
};

DualValue psi(const Joint2& q_xx, const Channel& ch);
DualValue theta(const Joint2& q_xx, double R, const Channel& ch, const Dist& q_x,
                const OptimizerOptions& opts);
DualValue lambda_bound(const Joint2& q_xx, const Channel& ch, const OptimizerOptions& opts);
DualValue phi_bound(const Joint2& q_xx, double R, const Channel& ch, const OptimizerOptions& opts);

// Theta's inner objective at fixed (rho, sigma, tau) with the minimizing V(.|y).
double theta_objective(const Joint2& q_xx, double R, const Channel& ch, const Dist& q_x,
                       double rho, double sigma, double tau);
// inf over (sigma, tau) at fixed rho, with its minimizer.
struct ThetaInner {
  double value = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
};
ThetaInner theta_inner(const Joint2& q_xx, double R, const Channel& ch, const Dist& q_x,
                       double rho, const OptimizerOptions& opts);

struct BoundValue {
  double value = 0.0;
  bool unbounded = false;
  std::string reason;
  Joint2 coupling;  // outer minimizer
  DualValue first, second;  // (Psi, Theta) or (Lambda, Phi) at the minimizer
};

BoundValue ml_upper_bound(const RatePoint& rp, const Channel& ch, const OptimizerOptions& opts);
BoundValue mmi_lower_bound(const RatePoint& rp, const Channel& ch, const OptimizerOptions& opts);

struct CertifyOptions {
  double certify_tol = 1e-4;
  double combined_tol = 0.02;
  std::size_t coupling_k = 4;  // lattice for the per-coupling inequality table
  bool primal = true;          // also compute both exponents for the sandwich checks
};

struct CouplingMargins {
  Joint2 coupling;
  double psi = 0.0, theta = 0.0, lambda = 0.0, phi = 0.0;
  double lambda_minus_psi = 0.0;
  double phi_minus_theta = 0.0;
  bool unbounded = false;
};

struct Check {
  std::string name;
  double margin = 0.0;  // >= -tol passes
  double tol = 0.0;
  bool passed = false;
  std::string note;

  bool operator==(const Check&) const = default;
};

struct BoundReport {
  double rate = 0.0;
  Dist composition;
  // Dual values at the coupling minimizing the ML upper bound.
  DualValue psi, theta, lambda, phi;
  Joint2 ml_coupling, mmi_coupling;
  double ml_upper = 0.0, mmi_lower = 0.0;
  bool ml_upper_unbounded = false, mmi_lower_unbounded = false;
  double trc_ml = 0.0, trc_mmi = 0.0;
  bool has_primal = false;
  double lambda_minus_psi = 0.0;   // minimum over the coupling table
  double phi_minus_theta = 0.0;    // minimum over the coupling table
  double mmi_minus_ml = 0.0;       // mmi_lower - ml_upper
  std::vector<CouplingMargins> per_coupling;
  std::vector<Check> checks;

  bool passed() const;
};

BoundReport certify_theorem1(const RatePoint& rp, const Channel& ch, const OptimizerOptions& opts,
                             const CertifyOptions& copts = {});

// Lambda - Psi and Phi - Theta over a coupling lattice and a list of rates.
struct Lemma3Report {
  std::vector<double> rates;
  std::vector<std::vector<CouplingMargins>> per_rate;  // [rate][coupling]
  double min_lambda_minus_psi = 0.0;
  double min_phi_minus_theta = 0.0;
  std::vector<Check> checks;

  bool passed() const;
};

Lemma3Report certify_lemma3(const Dist& q_x, const std::vector<double>& rates, const Channel& ch,
                            const OptimizerOptions& opts, const CertifyOptions& copts = {});

}  // namespace explab
