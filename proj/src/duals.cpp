#include "explab/duals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "explab/search.hpp"
#include "kernels.hpp"

namespace explab {

using detail::kInf;

namespace {

// c * l under 0 * (-inf) = 0.
double scale_log(double c, double l) {
  if (c == 0.0) return 0.0;
  if (l == -kInf) return c > 0.0 ? -kInf : kInf;
  return c * l;
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : -kInf; }

// a - b with infinities ordered; equal infinities give 0.
double margin(double a, double b) {
  if (std::isinf(a) && std::isinf(b) && (a > 0) == (b > 0)) return 0.0;
  return a - b;
}

struct PairMass {
  std::size_t x, x2;
  double q;
};

std::vector<PairMass> pairs_of(const Joint2& q_xx) {
  std::vector<PairMass> out;
  for (std::size_t x = 0; x < q_xx.rows(); ++x)
    for (std::size_t x2 = 0; x2 < q_xx.cols(); ++x2)
      if (q_xx.at(x, x2) > 0.0) out.push_back({x, x2, q_xx.at(x, x2)});
  return out;
}

void check_dims(const Joint2& q_xx, const Channel& ch) {
  if (q_xx.rows() != ch.inputs() || q_xx.cols() != ch.inputs())
    throw Error("coupling dimensions do not match the channel input alphabet");
}

// log U_y(sigma, tau) = min over V of log G(y, sigma, tau, V).
double log_u(const Channel& ch, std::span<const double> log_q, std::size_t y, double sigma,
             double tau) {
  const double t = sigma + tau;
  double terms[64];
  std::vector<double> big;
  double* tv = terms;
  const std::size_t nx = ch.inputs();
  if (nx > 64) {
    big.resize(nx);
    tv = big.data();
  }
  double mx = -kInf;
  for (std::size_t x = 0; x < nx; ++x) {
    tv[x] = ch.log_w(x, y) + scale_log(tau, log_q[x]);
    if (ch.log_w(x, y) == -kInf) tv[x] = -kInf;
    mx = std::max(mx, tv[x]);
  }
  if (t == 0.0 || mx == -kInf) return mx;
  double s = 0.0;
  for (std::size_t x = 0; x < nx; ++x) s += std::exp((tv[x] - mx) / t);
  return mx + t * std::log(s);
}

struct ThetaCtx {
  const Channel& ch;
  std::vector<PairMass> pairs;
  std::vector<double> log_q;
  double r_minus_h;
};

double theta_value(const ThetaCtx& c, double rho, double sigma, double tau) {
  const std::size_t ny = c.ch.outputs();
  double lu[64];
  std::vector<double> lu_big;
  double* lup = lu;
  if (ny > 64) {
    lu_big.resize(ny);
    lup = lu_big.data();
  }
  for (std::size_t y = 0; y < ny; ++y) lup[y] = log_u(c.ch, c.log_q, y, sigma, tau);
  double total = scale_log(rho * sigma, 1.0) * c.r_minus_h;
  std::vector<double> terms(ny);
  for (const auto& pm : c.pairs) {
    for (std::size_t y = 0; y < ny; ++y) {
      const double lw = c.ch.log_w(pm.x, y);
      if (lw == -kInf) {
        terms[y] = -kInf;
        continue;
      }
      // lup[y] is finite here: the column carries Q_X(x) W(y|x) > 0.
      terms[y] = lw + scale_log(rho, c.ch.log_w(pm.x2, y)) - rho * lup[y];
    }
    const double l = detail::log_sum_exp(terms);
    if (l == -kInf) return kInf;
    total -= pm.q * l;
  }
  return total;
}

// tau -> infinity, where sigma = 0 is optimal and log U_y -> sum_x Q(x) log W(y|x).
double theta_tau_limit(const ThetaCtx& c, double rho) {
  const std::size_t nx = c.ch.inputs(), ny = c.ch.outputs();
  std::vector<double> lu(ny, 0.0);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      if (c.log_q[x] == -kInf) continue;
      const double lw = c.ch.log_w(x, y);
      if (lw == -kInf) {
        lu[y] = -kInf;
        break;
      }
      lu[y] += std::exp(c.log_q[x]) * lw;
    }
  double total = 0.0;
  std::vector<double> terms(ny);
  for (const auto& pm : c.pairs) {
    for (std::size_t y = 0; y < ny; ++y) {
      const double lw = c.ch.log_w(pm.x, y), lw2 = c.ch.log_w(pm.x2, y);
      if (lw == -kInf || (rho > 0.0 && lw2 == -kInf)) {
        terms[y] = -kInf;
      } else if (rho > 0.0 && lu[y] == -kInf) {
        return -kInf;
      } else {
        terms[y] = lw + scale_log(rho, lw2) - rho * lu[y];
      }
    }
    const double l = detail::log_sum_exp(terms);
    if (l == -kInf) return kInf;
    total -= pm.q * l;
  }
  return total;
}

constexpr double kParamCap = 512.0;

std::vector<double> scalar_grid() {
  std::vector<double> g{0.0, 1.0};
  const int n = 10;
  for (int i = 0; i < n; ++i) g.push_back(1e-3 * std::pow(8.0 / 1e-3, static_cast<double>(i) / (n - 1)));
  std::sort(g.begin(), g.end());
  return g;
}

ThetaInner theta_inner_ctx(const ThetaCtx& c, double rho, const OptimizerOptions& o) {
  const auto axis = scalar_grid();
  std::vector<search::Point> grid;
  for (double s : axis)
    for (double t : axis) grid.push_back({s, t});
  const std::vector<search::Direction> dirs{{{0, 1.0}}, {{1, 1.0}}};
  auto objective = [&](std::span<const double> v, double, double) -> search::Eval {
    const double over = std::max(v[0], v[1]) - kParamCap;
    if (over > 0.0) return {kInf, over};
    return {theta_value(c, rho, v[0], v[1]), 0.0};
  };
  search::Settings s;
  s.initial_step = 0.25;
  s.refine_iters = std::max(o.refine_iters, 30);
  s.shrink = o.refine_shrink;
  s.slack = 0.0;
  s.restarts = o.restarts;
  s.random_directions = 2;
  const auto out = search::minimize(grid, dirs, objective, s);
  const double lim = theta_tau_limit(c, rho);
  if (lim < out.eval.value) return {lim, 0.0, kInf};
  return {out.eval.value, out.point[0], out.point[1]};
}

ThetaCtx theta_ctx(const Joint2& q_xx, double R, const Channel& ch, const Dist& q_x) {
  check_dims(q_xx, ch);
  if (q_x.size() != ch.inputs()) throw Error("composition does not match the channel");
  ThetaCtx c{ch, pairs_of(q_xx), {}, R - entropy(q_x)};
  for (double q : q_x.vec()) c.log_q.push_back(safe_log(q));
  return c;
}

DualValue from_ray(const search::ScalarMax& m, const std::string& what) {
  DualValue d;
  d.value = m.value;
  d.unbounded = m.unbounded;
  d.evaluations = m.evaluations;
  if (m.unbounded) {
    d.value = kInf;
    d.reason = what + " grows without bound along its multiplier";
  }
  return d;
}

// ---------------------------------------------------------------- Lambda / Phi

enum class LagKind { Lambda, Phi };

struct Lagrangian {
  const Channel& ch;
  std::size_t nx, ny;
  std::vector<double> q_xx;
  std::vector<std::size_t> active;
  std::vector<double> base_rows;
  LagKind kind;
  double R;
  std::vector<search::Point> grid;
  std::vector<double> grid_f, grid_d;
  std::size_t k_used = 0;

  void fill(std::span<const double> v, std::vector<double>& rows) const {
    rows = base_rows;
    for (std::size_t i = 0; i < active.size(); ++i)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * ny), ny,
                  rows.begin() + static_cast<std::ptrdiff_t>(active[i] * ny));
  }

  // (f, d) with the Lagrangian f + mu d.
  std::pair<double, double> parts(std::span<const double> v) const {
    thread_local std::vector<double> rows;
    thread_local detail::TripleMarginals m;
    fill(v, rows);
    const double f = detail::conditional_divergence(q_xx, rows, ch.log_matrix(), nx, ny);
    if (f == kInf) return {kInf, 0.0};
    detail::triple_marginals(q_xx, rows, nx, ny, m);
    const double i2 = mutual_information(m.x2y, nx, ny);
    if (kind == LagKind::Lambda) return {f, mutual_information(m.xy, nx, ny) - i2};
    return {f, R - i2};
  }
};

Lagrangian make_lagrangian(const Joint2& q_xx, const Channel& ch, LagKind kind, double R,
                           const OptimizerOptions& o) {
  check_dims(q_xx, ch);
  Lagrangian L{ch, ch.inputs(), ch.outputs(), q_xx.vec(), {}, {}, kind, R, {}, {}, {}, 0};
  L.base_rows.resize(L.nx * L.nx * L.ny);
  for (std::size_t x = 0; x < L.nx; ++x)
    for (std::size_t x2 = 0; x2 < L.nx; ++x2) {
      const std::size_t r = x * L.nx + x2;
      if (L.q_xx[r] > 1e-15) L.active.push_back(r);
      for (std::size_t y = 0; y < L.ny; ++y) L.base_rows[r * L.ny + y] = ch(x, y);
    }
  L.grid = search::product_simplex_grid(L.active.size(), L.ny, o.grid_k, o.budget_cap, &L.k_used);
  L.grid_f.resize(L.grid.size());
  L.grid_d.resize(L.grid.size());
  for (std::size_t i = 0; i < L.grid.size(); ++i) {
    const auto [f, d] = L.parts(L.grid[i]);
    L.grid_f[i] = f;
    L.grid_d[i] = d;
  }
  return L;
}

struct LagMin {
  double value;
  search::Point point;
  std::size_t evaluations;
};

LagMin lagrangian_min(const Lagrangian& L, double mu, const OptimizerOptions& o) {
  // Seeds: the best lattice points for this mu, re-polished by the pattern search.
  const std::size_t n = L.grid.size();
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i)
    vals[i] = L.grid_f[i] == kInf ? kInf : L.grid_f[i] + mu * L.grid_d[i];
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t keep = std::min<std::size_t>(n, static_cast<std::size_t>(8 * o.restarts));
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return vals[a] < vals[b] || (vals[a] == vals[b] && a < b);
                    });
  std::vector<search::Point> seeds;
  for (std::size_t i = 0; i < keep; ++i) seeds.push_back(L.grid[idx[i]]);
  const auto dirs = search::product_simplex_directions(L.active.size(), L.ny);
  auto objective = [&](std::span<const double> v, double, double) -> search::Eval {
    const auto [f, d] = L.parts(v);
    return {f == kInf ? kInf : f + mu * d, 0.0};
  };
  search::Settings s;
  s.initial_step = 1.0 / static_cast<double>(L.k_used);
  s.refine_iters = o.refine_iters;
  s.shrink = o.refine_shrink;
  s.slack = 0.0;
  s.restarts = o.restarts;
  const auto out = search::minimize(seeds, dirs, objective, s);
  return {out.eval.value, out.point, out.evaluations};
}

DualValue lagrangian_bound(const Joint2& q_xx, const Channel& ch, LagKind kind, double R,
                           const OptimizerOptions& o) {
  const Lagrangian L = make_lagrangian(q_xx, ch, kind, R, o);
  std::size_t evals = L.grid.size();
  auto f = [&](double mu) {
    const auto m = lagrangian_min(L, mu, o);
    evals += m.evaluations;
    return m.value;
  };
  const auto ray = search::maximize_ray(f, 1e-3, 8.0, 16, 3, 1e-7);
  DualValue d = from_ray(ray, kind == LagKind::Lambda ? "Lambda" : "Phi");
  d.params.mu = ray.arg;
  d.evaluations = evals;
  const auto m = lagrangian_min(L, ray.arg, o);
  std::vector<double> rows;
  L.fill(m.point, rows);
  std::vector<Dist> out;
  for (std::size_t r = 0; r < L.nx * L.nx; ++r)
    out.push_back(Dist::normalized({rows.begin() + static_cast<std::ptrdiff_t>(r * L.ny),
                                    rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * L.ny)}));
  d.params.q_y_given_pair = CondDist(std::move(out));
  return d;
}

// ---------------------------------------------------------------- outer bounds

enum class BoundKind { MlUpper, MmiLower };

struct PairValues {
  DualValue first, second;
  double combined;  // max of the two
};

BoundValue outer_bound(const RatePoint& rp, const Channel& ch, const OptimizerOptions& o,
                       BoundKind kind) {
  o.validate();
  if (!(rp.rate >= 0.0) || !std::isfinite(rp.rate)) throw Error("rate must be finite and nonnegative");
  const std::size_t nx = ch.inputs();
  if (rp.composition.size() != nx) throw Error("composition does not match the channel");
  if (!is_grid_aligned(rp.composition, o.outer_k))
    throw Error("composition is not aligned to the 1/" + std::to_string(o.outer_k) + " grid");
  const double R = rp.rate;
  OptimizerOptions inner = o;
  inner.threads = 1;

  auto first_of = [&](const Joint2& c) {
    return kind == BoundKind::MlUpper ? psi(c, ch) : lambda_bound(c, ch, inner);
  };
  auto second_of = [&](const Joint2& c) {
    return kind == BoundKind::MlUpper ? theta(c, R, ch, rp.composition, inner)
                                      : phi_bound(c, R, ch, inner);
  };

  const auto couplings = coupling_grid(rp.composition, o.outer_k, o.budget_cap);
  std::vector<search::Point> grid;
  for (const auto& c : couplings) grid.push_back(c.vec());
  const auto dirs = search::transport_directions(nx, nx);
  auto objective = [&](std::span<const double> v, double slack, double cutoff) -> search::Eval {
    const double info = mutual_information(v, nx, nx);
    const double viol = std::max(0.0, info - 2.0 * R);
    const double base = info - R;
    if (viol > slack || base >= cutoff) return {base, viol};
    const Joint2 c(nx, nx, Dist::normalized({v.begin(), v.end()}).vec());
    const DualValue a = first_of(c);
    if (a.value + base >= cutoff) return {a.value + base, viol};
    const DualValue b = second_of(c);
    return {std::max(a.value, b.value) + base, viol};
  };
  double qmax = 0.0;
  for (double q : rp.composition.vec()) qmax = std::max(qmax, q);
  search::Settings s;
  s.initial_step = qmax / static_cast<double>(o.outer_k);
  s.refine_iters = o.refine_iters;
  s.shrink = o.refine_shrink;
  s.slack = o.constraint_slack;
  s.restarts = o.restarts;
  s.threads = o.threads;
  const auto out = search::minimize(grid, dirs, objective, s);

  BoundValue b;
  b.coupling = Joint2(nx, nx, Dist::normalized(out.point).vec());
  b.first = first_of(b.coupling);
  b.second = second_of(b.coupling);
  b.value = std::max(b.first.value, b.second.value) + mutual_information(b.coupling) - R;
  if (std::isinf(b.value)) {
    b.unbounded = true;
    b.reason = !b.first.reason.empty() ? b.first.reason : b.second.reason;
    if (b.reason.empty()) b.reason = "no feasible coupling with a finite bound";
  }
  return b;
}

Check make_check(std::string name, double m, double tol, std::string note = {}) {
  Check c;
  c.name = std::move(name);
  c.margin = m;
  c.tol = tol;
  c.passed = !std::isnan(m) && m >= -tol;
  c.note = std::move(note);
  return c;
}

CouplingMargins margins_for(const Joint2& c, double R, const Channel& ch, const Dist& q_x,
                            const OptimizerOptions& o) {
  CouplingMargins m;
  m.coupling = c;
  const DualValue ps = psi(c, ch), th = theta(c, R, ch, q_x, o);
  const DualValue la = lambda_bound(c, ch, o), ph = phi_bound(c, R, ch, o);
  m.psi = ps.value;
  m.theta = th.value;
  m.lambda = la.value;
  m.phi = ph.value;
  m.lambda_minus_psi = margin(m.lambda, m.psi);
  m.phi_minus_theta = margin(m.phi, m.theta);
  m.unbounded = ps.unbounded || th.unbounded || la.unbounded || ph.unbounded;
  return m;
}

std::size_t table_k(const Dist& q_x, std::size_t want, std::size_t fallback) {
  return is_grid_aligned(q_x, want) ? want : fallback;
}

}  // namespace

double log_g_aux(std::size_t y, double sigma, double tau, const Dist& v, const Channel& ch,
                 const Dist& q_x) {
  const std::size_t nx = ch.inputs();
  if (y >= ch.outputs()) throw Error("g_aux: output symbol out of range");
  if (v.size() != nx || q_x.size() != nx) throw Error("g_aux: distribution sizes differ from |X|");
  if (!(sigma >= 0.0) || !(tau >= 0.0)) throw Error("g_aux: sigma and tau must be nonnegative");
  std::vector<double> t(nx);
  for (std::size_t x = 0; x < nx; ++x) {
    const double lw = ch.log_w(x, y);
    if (lw == -kInf) {
      t[x] = -kInf;
      continue;
    }
    if (tau > 0.0 && q_x[x] > 0.0 && v[x] <= 0.0)
      throw Error("g_aux: V vanishes where Q_X W(y|.) is positive (symbol " + std::to_string(x) + ")");
    t[x] = lw + scale_log(tau, safe_log(q_x[x])) - scale_log(tau, safe_log(v[x]));
    if (std::isnan(t[x])) t[x] = -kInf;  // Q = V = 0 with tau > 0: the term is 0
  }
  double mx = -kInf;
  std::size_t positive = 0;
  for (double a : t) {
    mx = std::max(mx, a);
    if (a > -kInf) ++positive;
  }
  if (sigma == 0.0 || mx == -kInf) return mx;
  if (std::isinf(sigma)) return positive > 1 ? kInf : mx;
  double s = 0.0;
  for (double a : t) s += std::exp((a - mx) / sigma);
  return mx + sigma * std::log(s);
}

double g_aux(std::size_t y, double sigma, double tau, const Dist& v, const Channel& ch,
             const Dist& q_x) {
  return std::exp(log_g_aux(y, sigma, tau, v, ch, q_x));
}

double log_g_aux_min(std::size_t y, double sigma, double tau, const Channel& ch, const Dist& q_x) {
  if (q_x.size() != ch.inputs()) throw Error("g_aux: composition size differs from |X|");
  std::vector<double> lq;
  for (double q : q_x.vec()) lq.push_back(safe_log(q));
  return log_u(ch, lq, y, sigma, tau);
}

DualValue psi(const Joint2& q_xx, const Channel& ch) {
  check_dims(q_xx, ch);
  const auto pairs = pairs_of(q_xx);
  const std::size_t ny = ch.outputs();
  for (const auto& pm : pairs) {
    bool overlap = false;
    for (std::size_t y = 0; y < ny; ++y) overlap = overlap || (ch.support(pm.x, y) && ch.support(pm.x2, y));
    if (!overlap) {
      DualValue d;
      d.value = kInf;
      d.unbounded = true;
      d.reason = "rows " + std::to_string(pm.x) + " and " + std::to_string(pm.x2) +
                 " have disjoint support";
      return d;
    }
  }
  std::vector<double> terms(ny);
  auto f = [&](double s) {
    double total = 0.0;
    for (const auto& pm : pairs) {
      for (std::size_t y = 0; y < ny; ++y)
        terms[y] = scale_log(1.0 - s, ch.log_w(pm.x, y)) + scale_log(s, ch.log_w(pm.x2, y));
      const double l = detail::log_sum_exp(terms);
      if (l == kInf) return -kInf;
      total -= pm.q * l;
    }
    return total;
  };
  const auto ray = search::maximize_ray(f, 1e-3, 8.0, 24, 3, 1e-12);
  DualValue d = from_ray(ray, "Psi");
  d.params.s = ray.arg;
  return d;
}

double theta_objective(const Joint2& q_xx, double R, const Channel& ch, const Dist& q_x,
                       double rho, double sigma, double tau) {
  return theta_value(theta_ctx(q_xx, R, ch, q_x), rho, sigma, tau);
}

ThetaInner theta_inner(const Joint2& q_xx, double R, const Channel& ch, const Dist& q_x,
                       double rho, const OptimizerOptions& opts) {
  return theta_inner_ctx(theta_ctx(q_xx, R, ch, q_x), rho, opts);
}

DualValue theta(const Joint2& q_xx, double R, const Channel& ch, const Dist& q_x,
                const OptimizerOptions& opts) {
  const ThetaCtx c = theta_ctx(q_xx, R, ch, q_x);
  std::size_t evals = 0;
  auto f = [&](double rho) {
    ++evals;
    return theta_inner_ctx(c, rho, opts).value;
  };
  const auto ray = search::maximize_ray(f, 1e-3, 8.0, 16, 3, 1e-7);
  DualValue d = from_ray(ray, "Theta");
  d.evaluations = evals;
  d.params.rho = ray.arg;
  if (!ray.unbounded) {
    const auto in = theta_inner_ctx(c, ray.arg, opts);
    d.params.sigma = in.sigma;
    d.params.tau = in.tau;
    std::vector<Dist> v;
    const double t = in.sigma + in.tau;
    for (std::size_t y = 0; y < ch.outputs() && std::isinf(in.tau); ++y) {
      // The minimizing V tends to Q_X on the column support.
      std::vector<double> w(ch.inputs(), 0.0);
      for (std::size_t x = 0; x < ch.inputs(); ++x)
        if (ch.log_w(x, y) > -kInf) w[x] = q_x[x];
      const double sum = std::accumulate(w.begin(), w.end(), 0.0);
      v.push_back(sum > 0.0 ? Dist::normalized(w) : Dist::uniform(ch.inputs()));
    }
    for (std::size_t y = 0; y < ch.outputs() && !std::isinf(in.tau); ++y) {
      std::vector<double> row(ch.inputs(), 0.0);
      for (std::size_t x = 0; x < ch.inputs(); ++x) {
        const double lt = ch.log_w(x, y) + scale_log(in.tau, c.log_q[x]);
        row[x] = lt == -kInf ? 0.0 : (t > 0.0 ? lt / t : lt);
      }
      // Normalize in the log domain (t = 0 degenerates to the max term).
      double mx = -kInf;
      for (std::size_t x = 0; x < ch.inputs(); ++x)
        if (ch.log_w(x, y) > -kInf && (in.tau == 0.0 || c.log_q[x] > -kInf)) mx = std::max(mx, row[x]);
      std::vector<double> w(ch.inputs(), 0.0);
      for (std::size_t x = 0; x < ch.inputs(); ++x) {
        const bool live = ch.log_w(x, y) > -kInf && (in.tau == 0.0 || c.log_q[x] > -kInf);
        if (!live) continue;
        w[x] = t > 0.0 ? std::exp(row[x] - mx) : (row[x] == mx ? 1.0 : 0.0);
      }
      const double sum = std::accumulate(w.begin(), w.end(), 0.0);
      v.push_back(sum > 0.0 ? Dist::normalized(w) : Dist::uniform(ch.inputs()));
    }
    d.params.v = CondDist(std::move(v));
  }
  return d;
}

DualValue lambda_bound(const Joint2& q_xx, const Channel& ch, const OptimizerOptions& opts) {
  return lagrangian_bound(q_xx, ch, LagKind::Lambda, 0.0, opts);
}

DualValue phi_bound(const Joint2& q_xx, double R, const Channel& ch, const OptimizerOptions& opts) {
  return lagrangian_bound(q_xx, ch, LagKind::Phi, R, opts);
}

BoundValue ml_upper_bound(const RatePoint& rp, const Channel& ch, const OptimizerOptions& opts) {
  return outer_bound(rp, ch, opts, BoundKind::MlUpper);
}

BoundValue mmi_lower_bound(const RatePoint& rp, const Channel& ch, const OptimizerOptions& opts) {
  return outer_bound(rp, ch, opts, BoundKind::MmiLower);
}

bool BoundReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

bool Lemma3Report::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

BoundReport certify_theorem1(const RatePoint& rp, const Channel& ch, const OptimizerOptions& opts,
                             const CertifyOptions& copts) {
  BoundReport rep;
  rep.rate = rp.rate;
  rep.composition = rp.composition;
  const double R = rp.rate;
  const BoundValue up = ml_upper_bound(rp, ch, opts);
  const BoundValue lo = mmi_lower_bound(rp, ch, opts);
  rep.ml_coupling = up.coupling;
  rep.mmi_coupling = lo.coupling;
  rep.ml_upper = up.value;
  rep.mmi_lower = lo.value;
  // Both are minima over the same coupling set; each is also evaluated at the
  // other's minimizer so the comparison does not hinge on search luck.
  {
    const double info = mutual_information(lo.coupling) - R;
    if (mutual_information(lo.coupling) <= 2.0 * R + opts.constraint_slack) {
      const double v = std::max(psi(lo.coupling, ch).value,
                                theta(lo.coupling, R, ch, rp.composition, opts).value) + info;
      if (v < rep.ml_upper) {
        rep.ml_upper = v;
        rep.ml_coupling = lo.coupling;
      }
    }
    const double info2 = mutual_information(up.coupling) - R;
    if (mutual_information(up.coupling) <= 2.0 * R + opts.constraint_slack) {
      const double v = std::max(lambda_bound(up.coupling, ch, opts).value,
                                phi_bound(up.coupling, R, ch, opts).value) + info2;
      if (v < rep.mmi_lower) {
        rep.mmi_lower = v;
        rep.mmi_coupling = up.coupling;
      }
    }
  }
  rep.ml_upper_unbounded = std::isinf(rep.ml_upper);
  rep.mmi_lower_unbounded = std::isinf(rep.mmi_lower);
  rep.psi = psi(rep.ml_coupling, ch);
  rep.theta = theta(rep.ml_coupling, R, ch, rp.composition, opts);
  rep.lambda = lambda_bound(rep.ml_coupling, ch, opts);
  rep.phi = phi_bound(rep.ml_coupling, R, ch, opts);
  rep.mmi_minus_ml = margin(rep.mmi_lower, rep.ml_upper);

  const std::size_t k = table_k(rp.composition, copts.coupling_k, opts.outer_k);
  rep.lambda_minus_psi = kInf;
  rep.phi_minus_theta = kInf;
  // The chain only uses the inequalities on couplings admitted by I(X;X') <= 2R.
  for (const auto& c : coupling_grid(rp.composition, k, opts.budget_cap)) {
    if (mutual_information(c) > 2.0 * R + opts.constraint_slack) continue;
    auto m = margins_for(c, R, ch, rp.composition, opts);
    rep.lambda_minus_psi = std::min(rep.lambda_minus_psi, m.lambda_minus_psi);
    rep.phi_minus_theta = std::min(rep.phi_minus_theta, m.phi_minus_theta);
    rep.per_coupling.push_back(std::move(m));
  }

  const double tol = copts.certify_tol, ctol = copts.combined_tol;
  rep.checks.push_back(make_check("psi<=lambda", rep.lambda_minus_psi, tol));
  rep.checks.push_back(make_check("theta<=phi", rep.phi_minus_theta, tol));
  rep.checks.push_back(make_check("ml_upper<=mmi_lower", rep.mmi_minus_ml, tol,
                                  rep.ml_upper_unbounded || rep.mmi_lower_unbounded ? "unbounded"
                                                                                    : ""));
  if (copts.primal) {
    rep.has_primal = true;
    rep.trc_ml = trc_exponent(rp, DecodingMetric::ml(), ch, opts).value;
    rep.trc_mmi = trc_exponent(rp, DecodingMetric::mmi(), ch, opts).value;
    rep.checks.push_back(make_check("trc_ml<=ml_upper", margin(rep.ml_upper, rep.trc_ml), ctol));
    rep.checks.push_back(make_check("mmi_lower<=trc_mmi", margin(rep.trc_mmi, rep.mmi_lower), ctol));
    rep.checks.push_back(
        make_check("trc_ml==trc_mmi", -std::abs(margin(rep.trc_ml, rep.trc_mmi)), ctol));
  }
  return rep;
}

Lemma3Report certify_lemma3(const Dist& q_x, const std::vector<double>& rates, const Channel& ch,
                            const OptimizerOptions& opts, const CertifyOptions& copts) {
  Lemma3Report rep;
  rep.rates = rates;
  rep.min_lambda_minus_psi = kInf;
  rep.min_phi_minus_theta = kInf;
  const auto couplings = coupling_grid(q_x, copts.coupling_k, opts.budget_cap);
  rep.per_rate.resize(rates.size());
  OptimizerOptions inner = opts;
  inner.threads = 1;
  for (std::size_t r = 0; r < rates.size(); ++r) rep.per_rate[r].resize(couplings.size());
  search::parallel_for(rates.size() * couplings.size(), opts.threads, [&](std::size_t i) {
    const std::size_t r = i / couplings.size(), c = i % couplings.size();
    rep.per_rate[r][c] = margins_for(couplings[c], rates[r], ch, q_x, inner);
  });
  for (const auto& row : rep.per_rate)
    for (const auto& m : row) {
      rep.min_lambda_minus_psi = std::min(rep.min_lambda_minus_psi, m.lambda_minus_psi);
      rep.min_phi_minus_theta = std::min(rep.min_phi_minus_theta, m.phi_minus_theta);
    }
  rep.checks.push_back(make_check("psi<=lambda", rep.min_lambda_minus_psi, copts.certify_tol));
  rep.checks.push_back(make_check("theta<=phi", rep.min_phi_minus_theta, copts.certify_tol));
  return rep;
}

}  // namespace explab
