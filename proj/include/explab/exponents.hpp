#pragma once

// Primal exponents over a DMC for a fixed input composition: the thresholds
// a(R,Q_Y) and alpha(R,Q_Y), the inner problems Gamma and Gamma-tilde, the
// typical-random-code and expurgated exponents, and the fixed-composition
// random coding exponent used as a baseline.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "explab/prob.hpp"

namespace explab {

enum class MetricKind { ML, MMI };

struct DecodingMetric {
  MetricKind kind = MetricKind::ML;

  static DecodingMetric ml() { return {MetricKind::ML}; }
  static DecodingMetric mmi() { return {MetricKind::MMI}; }

  // ML: sum Q(x,y) log W(y|x), -inf when Q leaves the channel support.
  // MMI: I_Q(X;Y), the channel is ignored.
  double evaluate(const Joint2& q_xy, const Channel& ch) const;
  std::string_view name() const { return kind == MetricKind::ML ? "ml" : "mmi"; }

  bool operator==(const DecodingMetric&) const = default;
};

DecodingMetric parse_metric(std::string_view name);

struct OptimizerOptions {
  std::size_t grid_k = 8;         // lattice resolution 1/k for the inner conditionals
  std::size_t outer_k = 8;        // resolution of the coupling lattice Q_{X'|X}
  int refine_iters = 20;
  double refine_shrink = 0.5;
  double constraint_slack = 1e-3;  // at the coarse lattice; tightens with the refinement step
  double value_tol = 1e-6;
  std::size_t budget_cap = 50'000;  // max lattice points per inner search
  std::size_t threshold_levels = 32;  // lattice levels of the a / alpha searches
  int restarts = 3;
  unsigned threads = 1;

  // k=8 for binary inputs, k=4 for larger alphabets.
  static OptimizerOptions for_inputs(std::size_t nx);
  void validate() const;
};

struct RatePoint {
  double rate = 0.0;
  Dist composition;
};

struct ExponentDiagnostics {
  std::size_t grid_points = 0;
  std::size_t grid_feasible = 0;
  std::size_t evaluations = 0;
  std::vector<double> refinement_trace;
  double final_slack = 0.0;
  // Inner constraint g(Q_X'Y) - max{g(Q_XY), a} at the witness (Gamma only).
  double boundary_distance = 0.0;
  double threshold = 0.0;  // a or alpha at the witness Q_Y
  bool feasible = true;
  std::string note;
};

struct ExponentResult {
  double value = 0.0;      // clamped at 0
  double raw_value = 0.0;  // as minimized
  Joint2 argmin_coupling;  // Q_{XX'} (empty for the random coding exponent)
  CondDist argmin_channel;  // Q_{Y|XX'} rows x*|X|+x', or Q_{Y|X} for random coding
  ExponentDiagnostics diagnostics;
};

// Memo of a(R,Q_Y) and alpha(R,Q_Y), keyed on Q_Y quantized to 1e-9. Values are
// computed at the quantized point so a hit and a miss return identical numbers.
// Safe for concurrent use.
class ThresholdCache {
 public:
  ThresholdCache();
  ~ThresholdCache();
  ThresholdCache(const ThresholdCache&) = delete;
  ThresholdCache& operator=(const ThresholdCache&) = delete;

  std::size_t size() const;
  std::size_t hits() const;
  std::size_t misses() const;

  struct Impl;
  Impl& impl() { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

double a_threshold(double R, const Dist& q_y, const DecodingMetric& metric, const Channel& ch,
                   const Dist& q_x, const OptimizerOptions& opts);
double alpha_threshold(double R, const Dist& q_y, const DecodingMetric& metric, const Channel& ch,
                       const Dist& q_x, const OptimizerOptions& opts);

// Inner problems for a fixed coupling. The returned result carries the witness
// Q_{Y|XX'} and its value (+inf when no feasible point was found).
ExponentResult gamma_detail(const Joint2& q_xx, double R, const DecodingMetric& metric,
                            const Channel& ch, const Dist& q_x, const OptimizerOptions& opts,
                            ThresholdCache* cache = nullptr);
ExponentResult gamma_tilde_detail(const Joint2& q_xx, double R, const DecodingMetric& metric,
                                  const Channel& ch, const Dist& q_x,
                                  const OptimizerOptions& opts, ThresholdCache* cache = nullptr);
double gamma(const Joint2& q_xx, double R, const DecodingMetric& metric, const Channel& ch,
             const Dist& q_x, const OptimizerOptions& opts);
double gamma_tilde(const Joint2& q_xx, double R, const DecodingMetric& metric, const Channel& ch,
                   const Dist& q_x, const OptimizerOptions& opts);

ExponentResult trc_exponent(const RatePoint& rp, const DecodingMetric& metric, const Channel& ch,
                            const OptimizerOptions& opts);
ExponentResult expurgated_exponent(const RatePoint& rp, const DecodingMetric& metric,
                                   const Channel& ch, const OptimizerOptions& opts);
ExponentResult random_coding_exponent_detail(const RatePoint& rp, const Channel& ch,
                                             const OptimizerOptions& opts);
double random_coding_exponent(const RatePoint& rp, const Channel& ch,
                              const OptimizerOptions& opts = {});

// Objective re-evaluation used by witness checks:
// sum q(x,x') D(Q(.|x,x') || W(.|x)).
double conditional_divergence(const Joint2& q_xx, const CondDist& y_given_pair, const Channel& ch);

enum class ExponentKind { Trc, Expurgated, Random };
std::string_view exponent_kind_name(ExponentKind k);
ExponentKind parse_exponent_kind(std::string_view name);

struct CurveRecord {
  double rate = 0.0;
  bool ok = false;
  std::optional<ExponentResult> result;
  std::string error;
};

struct ExponentCurve {
  ExponentKind kind = ExponentKind::Trc;
  DecodingMetric metric;
  Dist composition;
  std::vector<CurveRecord> records;
};

// One record per rate (rates must be ascending). Failures at a rate are
// recorded in that record and the sweep continues.
ExponentCurve sweep(std::span<const double> rates, const Dist& composition,
                    const DecodingMetric& metric, const Channel& ch, const OptimizerOptions& opts,
                    ExponentKind which);

}  // namespace explab
