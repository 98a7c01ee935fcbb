#include "explab/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "explab/prob.hpp"

namespace explab::search {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kPullTries = 3;

double linf(const Point& a, const Point& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Largest t in (0, h] keeping x + t d inside the nonnegative orthant; 0 if none.
double feasible_step(const Point& x, const Point& d, double h, std::size_t nonneg_end) {
  double t = h;
  const std::size_t end = std::min(nonneg_end, x.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (d[i] < 0.0) t = std::min(t, x[i] / -d[i]);
  }
  return t > 1e-16 ? t : 0.0;
}

Point dense(const Direction& d, std::size_t n) {
  Point v(n, 0.0);
  for (const auto& [i, c] : d) v[i] += c;
  return v;
}

struct Incumbent {
  Point x;
  Eval e;
};

// Moves y onto {h >= 0} along the ascent direction of h spanned by `basis`
// (finite differences), then brackets the boundary by regula falsi.
bool restore(Point& y, const Settings& s, std::span<const Point> basis, std::size_t& evals) {
  const auto& H = s.constraint;
  const std::size_t n = y.size();
  const double h0 = H(y);
  ++evals;
  if (!std::isfinite(h0)) return false;
  if (h0 >= 0.0) return true;
  constexpr double delta = 1e-7;
  Point d(n, 0.0), z(n), nb(n);
  double slope = 0.0;
  for (const auto& b : basis) {
    for (std::size_t i = 0; i < n; ++i) nb[i] = -b[i];
    const double tp = feasible_step(y, b, delta, s.nonneg_end);
    const double tm = feasible_step(y, nb, delta, s.nonneg_end);
    if (tp + tm <= 0.0) continue;
    auto at = [&](double t) {
      for (std::size_t i = 0; i < n; ++i) z[i] = y[i] + t * b[i];
      ++evals;
      return H(z);
    };
    const double hp = tp > 0.0 ? at(tp) : h0;
    const double hm = tm > 0.0 ? at(-tm) : h0;
    if (!std::isfinite(hp) || !std::isfinite(hm)) continue;
    const double g = (hp - hm) / (tp + tm);
    for (std::size_t i = 0; i < n; ++i) d[i] += g * b[i];
    slope += g * g;
  }
  double dmax = 0.0;
  for (double v : d) dmax = std::max(dmax, std::abs(v));
  if (slope <= 0.0 || dmax <= 0.0) return false;
  const double tmax = feasible_step(y, d, 1.0 / dmax, s.nonneg_end);
  if (tmax <= 0.0) return false;
  auto phi = [&](double t) {
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = y[i] + t * d[i];
      if (i < s.nonneg_end && z[i] < 0.0) z[i] = 0.0;
    }
    ++evals;
    return H(z);
  };
  double lo = 0.0, flo = h0;
  double hi = std::min(tmax, -h0 / slope);
  double fhi = phi(hi);
  for (int i = 0; i < 30 && !(fhi >= 0.0); ++i) {
    if (!std::isfinite(fhi) || hi >= tmax) return false;
    lo = hi;
    flo = fhi;
    hi = std::min(tmax, hi * 2.0);
    fhi = phi(hi);
  }
  if (!(fhi >= 0.0)) return false;
  int side = 0;
  for (int i = 0; i < 60 && fhi > 1e-13 && hi - lo > 1e-16; ++i) {
    double t = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    const double ft = phi(t);
    if (!std::isfinite(ft)) return false;
    if (ft >= 0.0) {
      hi = t;
      fhi = ft;
      if (side == 1) flo *= 0.5;
      side = 1;
    } else {
      lo = t;
      flo = ft;
      if (side == -1) fhi *= 0.5;
      side = -1;
    }
  }
  phi(hi);
  y = z;
  return true;
}

}  // namespace

bool better(const Eval& a, const Eval& b, double slack) {
  const bool fa = a.violation <= slack;
  const bool fb = b.violation <= slack;
  if (fa != fb) return fa;
  if (fa) return a.value < b.value;
  return a.violation < b.violation;
}

Outcome minimize(std::span<const Point> grid, std::span<const Direction> directions,
                 const Objective& f, const Settings& s) {
  if (grid.empty()) throw Error("search: empty grid");
  Outcome out;
  const std::size_t n = grid.front().size();
  const double slack0 = s.slack;

  std::vector<Eval> evals(grid.size());
  parallel_for(grid.size(), s.threads, [&](std::size_t i) { evals[i] = f(grid[i], slack0, kInf); });
  for (const auto& e : evals)
    if (e.violation <= slack0) ++out.grid_feasible;
  out.grid_points = grid.size();
  out.evaluations = grid.size();

  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Stable: among equal grid values the lexicographically first point wins.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return better(evals[a], evals[b], slack0); });

  std::vector<std::size_t> seeds;
  for (std::size_t idx : order) {
    if (static_cast<int>(seeds.size()) >= std::max(1, s.restarts)) break;
    bool far = true;
    for (std::size_t sidx : seeds) far = far && linf(grid[idx], grid[sidx]) > s.initial_step * 1.5;
    if (seeds.empty() || far) seeds.push_back(idx);
  }

  std::vector<Point> base;
  base.reserve(directions.size());
  const int random_dirs = directions.size() >= 2 ? s.random_directions : 0;
  for (const auto& d : directions) base.push_back(dense(d, n));
  const std::span<const Point> restore_basis(base.data(), std::min(base.size(), s.restore_dirs));

  std::mt19937_64 rng(s.rng_seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);

  Incumbent best{grid[seeds.front()], evals[seeds.front()]};
  double final_slack = slack0;
  std::vector<double> best_trace;
  bool first = true;
  std::vector<Point> polls;
  Point y(n), cand_x(n);
  std::vector<std::pair<double, Point>> pulls;

  for (std::size_t seed : seeds) {
    Incumbent cur{grid[seed], evals[seed]};
    std::vector<double> trace;
    double h = s.initial_step;
    double slack = slack0;
    for (int level = 0; level <= s.refine_iters; ++level) {
      const double ratio = h / s.initial_step;
      slack = slack0 * std::pow(ratio, s.slack_power);
      // Re-rank the incumbent once it no longer fits the tightened slack.
      if (cur.e.violation > slack) {
        cur.e = f(cur.x, slack, kInf);
        ++out.evaluations;
      }

      polls.clear();
      for (const auto& b : base) {
        polls.push_back(b);
        Point neg = b;
        for (double& v : neg) v = -v;
        polls.push_back(std::move(neg));
      }
      if (!base.empty()) {
        for (int r = 0; r < random_dirs; ++r) {
          Point v(n, 0.0);
          for (const auto& b : base) {
            const double c = coef(rng);
            for (std::size_t i = 0; i < n; ++i) v[i] += c * b[i];
          }
          double m = 0.0;
          for (double vi : v) m = std::max(m, std::abs(vi));
          if (m > 0.0) {
            for (double& vi : v) vi /= m;
            Point neg = v;
            for (double& vi : neg) vi = -vi;
            polls.push_back(std::move(v));
            polls.push_back(std::move(neg));
          }
        }
      }

      for (int move = 0; move < s.max_moves_per_level; ++move) {
        Eval cand_e = cur.e;
        bool improved = false;
        // Polls that lower the value but break the constraint, kept for restoration.
        pulls.clear();
        for (const auto& dir : polls) {
          const double t = feasible_step(cur.x, dir, h, s.nonneg_end);
          if (t <= 0.0) continue;
          for (std::size_t i = 0; i < n; ++i) {
            y[i] = cur.x[i] + t * dir[i];
            if (i < s.nonneg_end && y[i] < 0.0) y[i] = 0.0;
          }
          const double cutoff = cand_e.violation <= slack ? cand_e.value : kInf;
          const Eval e = f(y, slack, cutoff);
          ++out.evaluations;
          if (better(e, cand_e, slack)) {
            cand_x.swap(y);
            cand_e = e;
            improved = true;
          } else if (s.constraint && e.violation > slack && e.value < cutoff) {
            pulls.emplace_back(e.violation, y);
          }
        }
        if (!improved && !pulls.empty()) {
          // Shallow violations first: those polls run closest to the boundary.
          std::sort(pulls.begin(), pulls.end(),
                    [](const auto& a, const auto& b) { return a.first < b.first; });
          const std::size_t tries = std::min<std::size_t>(pulls.size(), kPullTries);
          for (std::size_t i = 0; i < tries && !improved; ++i) {
            Point& pt = pulls[i].second;
            if (!restore(pt, s, restore_basis, out.evaluations)) continue;
            const Eval e = f(pt, slack, kInf);
            ++out.evaluations;
            if (better(e, cand_e, slack)) {
              cand_x = pt;
              cand_e = e;
              improved = true;
            }
          }
        }
        if (!improved) break;
        cur.x = cand_x;
        cur.e = cand_e;
      }
      trace.push_back(cur.e.value);
      h *= s.shrink;
    }
    if (first || better(cur.e, best.e, slack)) {
      best = std::move(cur);
      best_trace = std::move(trace);
      final_slack = slack;
      first = false;
    }
  }

  out.point = std::move(best.x);
  out.eval = best.e;
  out.final_slack = final_slack;
  out.feasible = best.e.violation <= final_slack;
  out.trace = std::move(best_trace);
  return out;
}

std::vector<Point> product_simplex_grid(std::size_t rows, std::size_t dim, std::size_t k,
                                        std::size_t cap, std::size_t* k_used) {
  if (rows == 0) {
    if (k_used) *k_used = k;
    return {Point{}};
  }
  std::size_t kk = std::max<std::size_t>(k, 1);
  while (kk > 1 && std::pow(static_cast<double>(simplex_grid_count(dim, kk)),
                            static_cast<double>(rows)) > static_cast<double>(cap)) {
    --kk;
  }
  if (k_used) *k_used = kk;
  const auto comps = compositions(dim, kk);
  std::vector<Point> out;
  std::vector<std::size_t> idx(rows, 0);
  while (true) {
    Point p(rows * dim);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < dim; ++j)
        p[r * dim + j] = static_cast<double>(comps[idx[r]][j]) / static_cast<double>(kk);
    out.push_back(std::move(p));
    std::size_t r = rows;
    while (r > 0) {
      --r;
      if (++idx[r] < comps.size()) break;
      idx[r] = 0;
      if (r == 0) return out;
    }
  }
}

std::vector<Direction> product_simplex_directions(std::size_t rows, std::size_t dim,
                                                  std::size_t offset) {
  std::vector<Direction> single;
  std::vector<std::size_t> row_of;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = a + 1; b < dim; ++b) {
        single.push_back({{offset + r * dim + a, 1.0}, {offset + r * dim + b, -1.0}});
        row_of.push_back(r);
      }
  std::vector<Direction> out = single;
  for (std::size_t i = 0; i < single.size(); ++i)
    for (std::size_t j = i + 1; j < single.size(); ++j) {
      if (row_of[i] == row_of[j]) continue;
      for (double sj : {1.0, -1.0}) {
        Direction d = single[i];
        for (auto [c, v] : single[j]) d.emplace_back(c, sj * v);
        out.push_back(std::move(d));
      }
    }
  return out;
}

std::vector<Point> transport_grid(std::span<const double> row_sums,
                                  std::span<const double> col_sums, std::size_t levels,
                                  std::size_t cap) {
  const std::size_t nr = row_sums.size(), nc = col_sums.size();
  const std::size_t free_r = nr - 1, free_c = nc - 1;
  const std::size_t nfree = free_r * free_c;
  std::size_t lv = std::max<std::size_t>(levels, 1);
  while (lv > 1 && std::pow(static_cast<double>(lv + 1), static_cast<double>(nfree)) >
                       static_cast<double>(cap)) {
    --lv;
  }
  std::vector<Point> out;
  std::vector<double> block(nfree, 0.0);
  auto complete = [&]() {
    Point m(nr * nc, 0.0);
    for (std::size_t i = 0; i < free_r; ++i)
      for (std::size_t j = 0; j < free_c; ++j) m[i * nc + j] = block[i * free_c + j];
    // last column closes the rows, last row closes the columns
    for (std::size_t i = 0; i < free_r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < free_c; ++j) s += m[i * nc + j];
      m[i * nc + free_c] = row_sums[i] - s;
    }
    for (std::size_t j = 0; j < nc; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < free_r; ++i) s += m[i * nc + j];
      m[free_r * nc + j] = col_sums[j] - s;
    }
    for (double& v : m) {
      if (v < -1e-12) return;
      if (v < 0.0) v = 0.0;
    }
    out.push_back(std::move(m));
  };
  if (nfree == 0) {
    complete();
    return out;
  }
  auto rec = [&](auto&& self, std::size_t pos) -> void {
    if (pos == nfree) {
      complete();
      return;
    }
    const std::size_t i = pos / free_c, j = pos % free_c;
    const double hi = std::min(row_sums[i], col_sums[j]);
    for (std::size_t l = 0; l <= lv; ++l) {
      block[pos] = hi * static_cast<double>(l) / static_cast<double>(lv);
      self(self, pos + 1);
    }
  };
  rec(rec, 0);
  return out;
}

std::vector<Direction> transport_directions(std::size_t rows, std::size_t cols) {
  std::vector<Direction> out;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = i + 1; k < rows; ++k)
      for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t l = j + 1; l < cols; ++l)
          out.push_back({{i * cols + j, 1.0}, {k * cols + l, 1.0}, {i * cols + l, -1.0},
                         {k * cols + j, -1.0}});
  return out;
}

std::pair<double, double> golden_max(const std::function<double(double)>& f, double a, double b,
                                     double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? std::pair{c, fc} : std::pair{d, fd};
}

ScalarMax maximize_ray(const std::function<double(double)>& f, double lo, double hi, int grid,
                       int max_doublings, double tol) {
  ScalarMax out;
  std::vector<double> ts{0.0};
  for (int i = 0; i < grid; ++i) {
    ts.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (grid - 1)));
  }
  std::vector<double> vs;
  for (double t : ts) vs.push_back(f(t));
  out.evaluations = ts.size();

  auto argmax = [&]() {
    std::size_t best = 0;
    for (std::size_t i = 1; i < vs.size(); ++i)
      if (vs[i] > vs[best]) best = i;
    return best;
  };
  std::size_t best = argmax();
  int doublings = 0;
  while (best + 1 == ts.size() && doublings < max_doublings) {
    const double t = ts.back() * 2.0;
    ts.push_back(t);
    vs.push_back(f(t));
    ++out.evaluations;
    ++doublings;
    best = argmax();
  }
  if (best + 1 == ts.size()) {
    const std::size_t m = ts.size();
    const double growth = vs[m - 1] - vs[m - 2];
    out.arg = ts.back();
    out.value = vs.back();
    if (std::isinf(vs.back()) || growth > 1e-9 * (1.0 + std::abs(vs.back()))) {
      out.unbounded = true;
      out.value = kInf;
    }
    return out;
  }
  if (std::isinf(vs[best])) {
    out.arg = ts[best];
    out.value = vs[best];
    out.unbounded = vs[best] > 0;
    return out;
  }
  const double a = best == 0 ? 0.0 : ts[best - 1];
  const double b = ts[best + 1];
  std::size_t count = 0;
  auto counted = [&](double t) {
    ++count;
    return f(t);
  };
  auto [arg, val] = golden_max(counted, a, b, tol);
  out.evaluations += count;
  if (val > vs[best]) {
    out.arg = arg;
    out.value = val;
  } else {
    out.arg = ts[best];
    out.value = vs[best];
  }
  return out;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

unsigned default_threads() {
  if (const char* env = std::getenv("EXPLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

}  // namespace explab::search
