#include "explab/exponents.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include "explab/search.hpp"
#include "kernels.hpp"
#include "pair_dual.hpp"

namespace explab {

using detail::kInf;

double DecodingMetric::evaluate(const Joint2& q_xy, const Channel& ch) const {
  if (kind == MetricKind::MMI) return mutual_information(q_xy);
  if (q_xy.rows() != ch.inputs() || q_xy.cols() != ch.outputs())
    throw Error("metric: joint dimensions do not match the channel");
  return detail::expected_log_w(q_xy.probs(), ch.log_matrix());
}

DecodingMetric parse_metric(std::string_view name) {
  if (name == "ml") return DecodingMetric::ml();
  if (name == "mmi") return DecodingMetric::mmi();
  throw Error("unknown metric '" + std::string(name) + "' (expected ml or mmi)");
}

OptimizerOptions OptimizerOptions::for_inputs(std::size_t nx) {
  OptimizerOptions o;
  if (nx > 2) {
    o.grid_k = 4;
    o.outer_k = 4;
    o.threshold_levels = 8;
  }
  return o;
}

void OptimizerOptions::validate() const {
  if (grid_k == 0 || outer_k == 0) throw Error("optimizer: grid resolution must be positive");
  if (refine_iters < 0) throw Error("optimizer: refine_iters must be nonnegative");
  if (!(refine_shrink > 0.0 && refine_shrink < 1.0))
    throw Error("optimizer: refine_shrink must lie in (0,1)");
  if (!(constraint_slack > 0.0)) throw Error("optimizer: constraint_slack must be positive");
  if (!(value_tol > 0.0)) throw Error("optimizer: value_tol must be positive");
  if (budget_cap == 0 || threshold_levels == 0) throw Error("optimizer: budget must be positive");
  if (restarts < 1) throw Error("optimizer: restarts must be >= 1");
}

// ---------------------------------------------------------------- cache

struct ThresholdCache::Impl {
  mutable std::shared_mutex mu;
  std::unordered_map<std::string, double> map;
  std::atomic<std::size_t> hits{0}, misses{0};
};

ThresholdCache::ThresholdCache() : impl_(std::make_unique<Impl>()) {}
ThresholdCache::~ThresholdCache() = default;

std::size_t ThresholdCache::size() const {
  std::shared_lock lock(impl_->mu);
  return impl_->map.size();
}
std::size_t ThresholdCache::hits() const { return impl_->hits.load(); }
std::size_t ThresholdCache::misses() const { return impl_->misses.load(); }

namespace {

constexpr double kQuantum = 1e9;

enum class ThresholdKind { A, Alpha };

struct Problem {
  const Channel& ch;
  std::size_t nx, ny;
  std::span<const double> logw;
  std::vector<double> qx;
  MetricKind metric;

  Problem(const Channel& c, const Dist& q_x, const DecodingMetric& m)
      : ch(c), nx(c.inputs()), ny(c.outputs()), logw(c.log_matrix()), qx(q_x.vec()),
        metric(m.kind) {
    if (q_x.size() != nx) throw Error("composition size does not match the channel input alphabet");
  }

  double g(std::span<const double> joint) const {
    if (metric == MetricKind::ML) return detail::expected_log_w(joint, logw);
    return mutual_information(joint, nx, ny);
  }
};

search::Settings settings_from(const OptimizerOptions& o, double initial_step) {
  search::Settings s;
  s.initial_step = initial_step;
  s.refine_iters = o.refine_iters;
  s.shrink = o.refine_shrink;
  s.slack = o.constraint_slack;
  s.restarts = o.restarts;
  s.slack_power = 1.0;
  return s;
}

// max over Q_{X~Y} with marginals (q_x, q_y) and I <= R of g (or g - I + R).
double threshold_search(const Problem& p, double R, std::span<const double> qy, ThresholdKind kind,
                        const OptimizerOptions& o) {
  auto grid = search::transport_grid(p.qx, qy, o.threshold_levels, o.budget_cap);
  search::Point product(p.nx * p.ny);
  for (std::size_t x = 0; x < p.nx; ++x)
    for (std::size_t y = 0; y < p.ny; ++y) product[x * p.ny + y] = p.qx[x] * qy[y];
  const double at_product = [&] {
    const double gv = p.g(product);
    if (gv == -kInf) return -kInf;
    return kind == ThresholdKind::A ? gv : gv + R;
  }();
  grid.push_back(std::move(product));
  const auto dirs = search::transport_directions(p.nx, p.ny);

  auto objective = [&](std::span<const double> v, double, double) -> search::Eval {
    const double gv = p.g(v);
    if (gv == -kInf) return {kInf, kInf};
    const double info = mutual_information(v, p.nx, p.ny);
    const double obj = kind == ThresholdKind::A ? gv : gv - info + R;
    return {-obj, std::max(0.0, info - R)};
  };
  double span_max = 0.0;
  for (double a : p.qx)
    for (double b : qy) span_max = std::max(span_max, std::min(a, b));
  auto s = settings_from(o, std::max(span_max, 1e-6) / static_cast<double>(o.threshold_levels));
  s.restarts = std::min(o.restarts, 2);
  s.constraint = [&](std::span<const double> v) { return R - mutual_information(v, p.nx, p.ny); };
  const auto out = search::minimize(grid, dirs, objective, s);
  // The product has I = 0 and is feasible at every rate.
  if (!out.feasible) return at_product;
  return std::max(-out.eval.value, at_product);
}

std::string cache_key(ThresholdKind kind, MetricKind metric, double R,
                      std::span<const std::int64_t> q) {
  std::string key;
  key.push_back(static_cast<char>(kind));
  key.push_back(static_cast<char>(metric));
  const auto rb = std::bit_cast<std::uint64_t>(R);
  key.append(reinterpret_cast<const char*>(&rb), sizeof rb);
  key.append(reinterpret_cast<const char*>(q.data()), q.size() * sizeof(std::int64_t));
  return key;
}

double cached_threshold(const Problem& p, double R, std::span<const double> qy,
                        ThresholdKind kind, const OptimizerOptions& o, ThresholdCache* cache) {
  std::vector<std::int64_t> q(qy.size());
  for (std::size_t i = 0; i < qy.size(); ++i)
    q[i] = static_cast<std::int64_t>(std::llround(qy[i] * kQuantum));
  // Quantized point, renormalized with the residue on the largest entry.
  std::vector<double> qq(qy.size());
  std::int64_t total = 0;
  std::size_t big = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    total += q[i];
    if (q[i] > q[big]) big = i;
  }
  q[big] += static_cast<std::int64_t>(kQuantum) - total;
  for (std::size_t i = 0; i < q.size(); ++i) qq[i] = static_cast<double>(q[i]) / kQuantum;

  if (!cache) return threshold_search(p, R, qq, kind, o);
  auto& impl = cache->impl();
  const std::string key = cache_key(kind, p.metric, R, q);
  {
    std::shared_lock lock(impl.mu);
    auto it = impl.map.find(key);
    if (it != impl.map.end()) {
      ++impl.hits;
      return it->second;
    }
  }
  const double v = threshold_search(p, R, qq, kind, o);
  std::unique_lock lock(impl.mu);
  ++impl.misses;
  impl.map[key] = v;
  return v;
}

void check_rate(double R) {
  if (!(R >= 0.0) || !std::isfinite(R)) throw Error("rate must be finite and nonnegative");
}

double threshold_public(double R, const Dist& q_y, const DecodingMetric& metric, const Channel& ch,
                        const Dist& q_x, const OptimizerOptions& opts, ThresholdKind kind) {
  opts.validate();
  check_rate(R);
  if (q_y.size() != ch.outputs()) throw Error("output distribution does not match the channel");
  const Problem p(ch, q_x, metric);
  return threshold_search(p, R, q_y.probs(), kind, opts);
}

// Rows x*nx+x'; a row without mass (infeasible witness) is reported as W(.|x).
CondDist rows_to_cond(std::span<const double> rows, const Channel& ch) {
  const std::size_t nx = ch.inputs(), ny = ch.outputs();
  std::vector<Dist> out;
  out.reserve(nx * nx);
  for (std::size_t r = 0; r < nx * nx; ++r) {
    std::vector<double> row(rows.begin() + static_cast<std::ptrdiff_t>(r * ny),
                            rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * ny));
    double total = 0.0;
    for (double v : row) total += v;
    if (total > 0.0)
      out.push_back(Dist::normalized(std::move(row)));
    else
      out.push_back(ch.matrix()[r / nx]);
  }
  return CondDist(std::move(out));
}

void check_coupling(const Joint2& q_xx, const Problem& p, double tol) {
  if (q_xx.rows() != p.nx || q_xx.cols() != p.nx)
    throw Error("coupling dimensions do not match the channel input alphabet");
  const Dist r = q_xx.row_marginal(), c = q_xx.col_marginal();
  for (std::size_t x = 0; x < p.nx; ++x)
    if (std::abs(r[x] - p.qx[x]) > tol || std::abs(c[x] - p.qx[x]) > tol)
      throw Error("coupling marginals differ from the composition");
}

enum class InnerKind { Gamma, GammaTilde };

// Gamma / Gamma-tilde for one coupling. The outer search runs over the joint
// J' = Q_{X'Y} (rows Q_{Y|X'} of the inputs X' that carry mass); the remaining
// minimization over Q_{Y|XX'} with Q_{X'Y} = J' is convex and solved exactly
// by its dual. Gamma adds the constraint g(J') >= a(R, Q_Y).
ExponentResult inner_search(const Problem& p, std::span<const double> q_xx, double R,
                            InnerKind kind, const OptimizerOptions& o, ThresholdCache* cache) {
  std::vector<std::size_t> active;
  for (std::size_t x2 = 0; x2 < p.nx; ++x2)
    if (p.qx[x2] > 1e-15) active.push_back(x2);
  const std::size_t na = active.size();
  std::size_t k_used = o.grid_k;
  const auto grid = search::product_simplex_grid(na, p.ny, o.grid_k, o.budget_cap, &k_used);
  const auto dirs = search::product_simplex_directions(na, p.ny);
  const ThresholdKind tk = kind == InnerKind::Gamma ? ThresholdKind::A : ThresholdKind::Alpha;

  struct Scratch {
    std::vector<double> joint, qy;
  };
  auto fill = [&](std::span<const double> v, Scratch& sc) {
    sc.joint.assign(p.nx * p.ny, 0.0);
    sc.qy.assign(p.ny, 0.0);
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t y = 0; y < p.ny; ++y) {
        const double j = p.qx[active[i]] * v[i * p.ny + y];
        sc.joint[active[i] * p.ny + y] = j;
        sc.qy[y] += j;
      }
  };
  auto solve = [&](const Scratch& sc, double gamma_v, double beta) {
    detail::PairDualInput in;
    in.nx = p.nx;
    in.ny = p.ny;
    in.q_xx = q_xx;
    in.logw = p.logw;
    in.joint2 = sc.joint;
    in.metric = p.metric;
    in.gamma = gamma_v;
    in.soft = kind == InnerKind::GammaTilde;
    in.beta = beta;
    return detail::solve_pair_dual(in);
  };

  auto objective = [&](std::span<const double> v, double, double cutoff) -> search::Eval {
    thread_local Scratch sc;
    fill(v, sc);
    const double g2 = p.g(sc.joint);
    if (kind == InnerKind::Gamma) {
      if (g2 == -kInf) return {kInf, kInf};
      const double f = solve(sc, g2, 0.0).value;
      if (f >= cutoff) return {f, 0.0};
      const double thr = cached_threshold(p, R, sc.qy, tk, o, cache);
      return {f, std::max(0.0, thr - g2)};
    }
    if (g2 == -kInf) return {kInf, 0.0};
    const double thr = cached_threshold(p, R, sc.qy, tk, o, cache);
    return {solve(sc, g2, std::max(0.0, thr - g2)).value, 0.0};
  };

  auto s = settings_from(o, 1.0 / static_cast<double>(k_used));
  if (kind == InnerKind::Gamma) {
    s.restore_dirs = na * p.ny * (p.ny - 1) / 2;
    s.constraint = [&](std::span<const double> v) {
      thread_local Scratch sc;
      fill(v, sc);
      const double g2 = p.g(sc.joint);
      if (g2 == -kInf) return -kInf;
      return g2 - cached_threshold(p, R, sc.qy, tk, o, cache);
    };
  }
  const auto out = search::minimize(grid, dirs, objective, s);

  ExponentResult res;
  Scratch sc;
  fill(out.point, sc);
  const double g2 = p.g(sc.joint);
  const double thr = cached_threshold(p, R, sc.qy, tk, o, cache);
  const auto sol = solve(sc, g2, std::max(0.0, thr - g2));
  res.argmin_channel = rows_to_cond(sol.rows, p.ch);
  res.argmin_coupling = Joint2(p.nx, p.nx, {q_xx.begin(), q_xx.end()});
  auto& d = res.diagnostics;
  d.grid_points = out.grid_points;
  d.grid_feasible = out.grid_feasible;
  d.evaluations = out.evaluations;
  d.refinement_trace = out.trace;
  d.final_slack = out.final_slack;
  d.feasible = out.feasible && sol.value < kInf;
  d.threshold = thr;
  detail::TripleMarginals m;
  detail::triple_marginals(q_xx, sol.rows, p.nx, p.ny, m);
  d.boundary_distance = g2 - std::max(p.g(m.xy), thr);
  res.raw_value = d.feasible ? out.eval.value : kInf;
  res.value = std::max(0.0, res.raw_value);
  if (!d.feasible) d.note = "no feasible conditional found";
  return res;
}

enum class OuterKind { Trc, Expurgated };

ExponentResult outer_search(const RatePoint& rp, const DecodingMetric& metric, const Channel& ch,
                            const OptimizerOptions& o, OuterKind kind) {
  o.validate();
  check_rate(rp.rate);
  const Problem p(ch, rp.composition, metric);
  if (!is_grid_aligned(rp.composition, o.outer_k))
    throw Error("composition is not aligned to the 1/" + std::to_string(o.outer_k) + " grid");
  const double R = rp.rate;
  const double info_cap = kind == OuterKind::Trc ? 2.0 * R : R;
  const InnerKind ik = kind == OuterKind::Trc ? InnerKind::Gamma : InnerKind::GammaTilde;
  ThresholdCache cache;
  OptimizerOptions inner = o;
  inner.threads = 1;

  const auto couplings = coupling_grid(rp.composition, o.outer_k, o.budget_cap);
  std::vector<search::Point> grid;
  grid.reserve(couplings.size());
  for (const auto& c : couplings) grid.push_back(c.vec());
  const auto dirs = search::transport_directions(p.nx, p.nx);

  auto objective = [&](std::span<const double> v, double slack, double cutoff) -> search::Eval {
    const double info = mutual_information(v, p.nx, p.nx);
    const double viol = std::max(0.0, info - info_cap);
    const double base = info - R;
    if (viol > slack || base >= cutoff) return {base, viol};
    const auto r = inner_search(p, v, R, ik, inner, &cache);
    return {r.raw_value + base, viol};
  };

  double qmax = 0.0;
  for (double q : p.qx) qmax = std::max(qmax, q);
  auto s = settings_from(o, qmax / static_cast<double>(o.outer_k));
  s.threads = o.threads;
  s.constraint = [&](std::span<const double> v) {
    return info_cap - mutual_information(v, p.nx, p.nx);
  };
  const auto out = search::minimize(grid, dirs, objective, s);

  ExponentResult res = inner_search(p, out.point, R, ik, inner, &cache);
  const double info = mutual_information(out.point, p.nx, p.nx);
  res.raw_value = res.raw_value + info - R;
  res.value = std::max(0.0, res.raw_value);
  auto& d = res.diagnostics;
  d.grid_points = out.grid_points;
  d.grid_feasible = out.grid_feasible;
  d.evaluations = out.evaluations;
  d.refinement_trace = out.trace;
  d.final_slack = out.final_slack;
  if (!out.feasible) {
    d.feasible = false;
    d.note = "no coupling satisfies the information constraint";
  }
  return res;
}

}  // namespace

double a_threshold(double R, const Dist& q_y, const DecodingMetric& metric, const Channel& ch,
                   const Dist& q_x, const OptimizerOptions& opts) {
  return threshold_public(R, q_y, metric, ch, q_x, opts, ThresholdKind::A);
}

double alpha_threshold(double R, const Dist& q_y, const DecodingMetric& metric, const Channel& ch,
                       const Dist& q_x, const OptimizerOptions& opts) {
  return threshold_public(R, q_y, metric, ch, q_x, opts, ThresholdKind::Alpha);
}

ExponentResult gamma_detail(const Joint2& q_xx, double R, const DecodingMetric& metric,
                            const Channel& ch, const Dist& q_x, const OptimizerOptions& opts,
                            ThresholdCache* cache) {
  opts.validate();
  check_rate(R);
  const Problem p(ch, q_x, metric);
  check_coupling(q_xx, p, std::max(opts.constraint_slack, 1e-9));
  return inner_search(p, q_xx.probs(), R, InnerKind::Gamma, opts, cache);
}

ExponentResult gamma_tilde_detail(const Joint2& q_xx, double R, const DecodingMetric& metric,
                                  const Channel& ch, const Dist& q_x,
                                  const OptimizerOptions& opts, ThresholdCache* cache) {
  opts.validate();
  check_rate(R);
  const Problem p(ch, q_x, metric);
  check_coupling(q_xx, p, std::max(opts.constraint_slack, 1e-9));
  return inner_search(p, q_xx.probs(), R, InnerKind::GammaTilde, opts, cache);
}

double gamma(const Joint2& q_xx, double R, const DecodingMetric& metric, const Channel& ch,
             const Dist& q_x, const OptimizerOptions& opts) {
  ThresholdCache cache;
  return gamma_detail(q_xx, R, metric, ch, q_x, opts, &cache).raw_value;
}

double gamma_tilde(const Joint2& q_xx, double R, const DecodingMetric& metric, const Channel& ch,
                   const Dist& q_x, const OptimizerOptions& opts) {
  ThresholdCache cache;
  return gamma_tilde_detail(q_xx, R, metric, ch, q_x, opts, &cache).raw_value;
}

ExponentResult trc_exponent(const RatePoint& rp, const DecodingMetric& metric, const Channel& ch,
                            const OptimizerOptions& opts) {
  return outer_search(rp, metric, ch, opts, OuterKind::Trc);
}

ExponentResult expurgated_exponent(const RatePoint& rp, const DecodingMetric& metric,
                                   const Channel& ch, const OptimizerOptions& opts) {
  return outer_search(rp, metric, ch, opts, OuterKind::Expurgated);
}

ExponentResult random_coding_exponent_detail(const RatePoint& rp, const Channel& ch,
                                             const OptimizerOptions& o) {
  o.validate();
  check_rate(rp.rate);
  const Problem p(ch, rp.composition, DecodingMetric::ml());
  std::vector<std::size_t> active;
  for (std::size_t x = 0; x < p.nx; ++x)
    if (p.qx[x] > 0.0) active.push_back(x);
  std::vector<double> base(p.nx * p.ny);
  for (std::size_t x = 0; x < p.nx; ++x)
    for (std::size_t y = 0; y < p.ny; ++y) base[x * p.ny + y] = p.ch(x, y);
  const double R = rp.rate;

  auto fill = [&](std::span<const double> v, std::vector<double>& rows) {
    rows = base;
    for (std::size_t i = 0; i < active.size(); ++i)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * p.ny), p.ny,
                  rows.begin() + static_cast<std::ptrdiff_t>(active[i] * p.ny));
  };
  auto value_at = [&](const std::vector<double>& rows) {
    double d = 0.0;
    std::vector<double> joint(p.nx * p.ny);
    for (std::size_t x = 0; x < p.nx; ++x) {
      if (p.qx[x] <= 0.0) continue;
      const double dx = detail::row_divergence(&rows[x * p.ny], &p.logw[x * p.ny], p.ny);
      if (dx == kInf) return kInf;
      d += p.qx[x] * dx;
      for (std::size_t y = 0; y < p.ny; ++y) joint[x * p.ny + y] = p.qx[x] * rows[x * p.ny + y];
    }
    return d + std::max(0.0, mutual_information(joint, p.nx, p.ny) - R);
  };
  auto objective = [&](std::span<const double> v, double, double) -> search::Eval {
    thread_local std::vector<double> rows;
    fill(v, rows);
    return {value_at(rows), 0.0};
  };

  std::size_t k_used = o.grid_k;
  auto grid = search::product_simplex_grid(active.size(), p.ny, o.grid_k, o.budget_cap, &k_used);
  // The channel itself is always a candidate (value [I - R]_+).
  search::Point wpt;
  for (std::size_t x : active)
    for (std::size_t y = 0; y < p.ny; ++y) wpt.push_back(p.ch(x, y));
  grid.push_back(std::move(wpt));
  const auto dirs = search::product_simplex_directions(active.size(), p.ny);
  auto s = settings_from(o, 1.0 / static_cast<double>(k_used));
  const auto out = search::minimize(grid, dirs, objective, s);

  ExponentResult res;
  std::vector<double> rows;
  fill(out.point, rows);
  std::vector<Dist> conds;
  for (std::size_t x = 0; x < p.nx; ++x)
    conds.push_back(Dist::normalized({rows.begin() + static_cast<std::ptrdiff_t>(x * p.ny),
                                      rows.begin() + static_cast<std::ptrdiff_t>((x + 1) * p.ny)}));
  res.argmin_channel = CondDist(std::move(conds));
  res.raw_value = out.eval.value;
  res.value = std::max(0.0, res.raw_value);
  auto& d = res.diagnostics;
  d.grid_points = out.grid_points;
  d.grid_feasible = out.grid_feasible;
  d.evaluations = out.evaluations;
  d.refinement_trace = out.trace;
  d.final_slack = out.final_slack;
  return res;
}

double random_coding_exponent(const RatePoint& rp, const Channel& ch,
                              const OptimizerOptions& opts) {
  return random_coding_exponent_detail(rp, ch, opts).value;
}

double conditional_divergence(const Joint2& q_xx, const CondDist& y_given_pair,
                              const Channel& ch) {
  const std::size_t nx = ch.inputs(), ny = ch.outputs();
  if (q_xx.rows() != nx || q_xx.cols() != nx || y_given_pair.num_rows() != nx * nx ||
      y_given_pair.num_outputs() != ny)
    throw Error("conditional_divergence: dimension mismatch");
  std::vector<double> rows;
  rows.reserve(nx * nx * ny);
  for (const auto& r : y_given_pair.rows()) rows.insert(rows.end(), r.vec().begin(), r.vec().end());
  return detail::conditional_divergence(q_xx.probs(), rows, ch.log_matrix(), nx, ny);
}

std::string_view exponent_kind_name(ExponentKind k) {
  switch (k) {
    case ExponentKind::Trc: return "trc";
    case ExponentKind::Expurgated: return "ex";
    case ExponentKind::Random: return "random";
  }
  return "?";
}

ExponentKind parse_exponent_kind(std::string_view name) {
  if (name == "trc") return ExponentKind::Trc;
  if (name == "ex" || name == "expurgated") return ExponentKind::Expurgated;
  if (name == "random" || name == "rc") return ExponentKind::Random;
  throw Error("unknown exponent '" + std::string(name) + "' (expected trc, ex or random)");
}

ExponentCurve sweep(std::span<const double> rates, const Dist& composition,
                    const DecodingMetric& metric, const Channel& ch, const OptimizerOptions& opts,
                    ExponentKind which) {
  if (!std::is_sorted(rates.begin(), rates.end())) throw Error("sweep: rates must be ascending");
  ExponentCurve curve;
  curve.kind = which;
  curve.metric = metric;
  curve.composition = composition;
  curve.records.resize(rates.size());
  OptimizerOptions point_opts = opts;
  point_opts.threads = 1;
  search::parallel_for(rates.size(), opts.threads, [&](std::size_t i) {
    CurveRecord& rec = curve.records[i];
    rec.rate = rates[i];
    try {
      const RatePoint rp{rates[i], composition};
      switch (which) {
        case ExponentKind::Trc: rec.result = trc_exponent(rp, metric, ch, point_opts); break;
        case ExponentKind::Expurgated:
          rec.result = expurgated_exponent(rp, metric, ch, point_opts);
          break;
        case ExponentKind::Random:
          rec.result = random_coding_exponent_detail(rp, ch, point_opts);
          break;
      }
      rec.ok = rec.result->diagnostics.feasible;
      if (!rec.ok) rec.error = rec.result->diagnostics.note;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });
  return curve;
}

}  // namespace explab
