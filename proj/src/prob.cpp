#include "explab/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace explab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_probs(std::span<const double> p, const char* what) {
  if (p.empty()) throw Error(std::string(what) + ": empty probability vector");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(std::string(what) + ": entry outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    throw Error(std::string(what) + ": entries sum to " + std::to_string(sum));
  }
}

}  // namespace

Dist::Dist(std::vector<double> probs) : p_(std::move(probs)) { check_probs(p_, "Dist"); }

Dist Dist::uniform(std::size_t n) {
  if (n == 0) throw Error("Dist::uniform: empty alphabet");
  return Dist(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Dist Dist::point_mass(std::size_t n, std::size_t at) {
  if (at >= n) throw Error("Dist::point_mass: symbol out of range");
  std::vector<double> p(n, 0.0);
  p[at] = 1.0;
  return Dist(std::move(p));
}

Dist Dist::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double& w : weights) {
    if (!(w > 0.0)) w = 0.0;
    sum += w;
  }
  if (!(sum > 0.0)) throw Error("Dist::normalized: no positive mass");
  for (double& w : weights) w /= sum;
  return Dist(std::move(weights));
}

CondDist::CondDist(std::vector<Dist> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw Error("CondDist: no rows");
  for (const auto& r : rows_) {
    if (r.size() != rows_.front().size()) throw Error("CondDist: ragged rows");
  }
}

Joint2::Joint2(std::size_t rows, std::size_t cols, std::vector<double> probs)
    : rows_(rows), cols_(cols), p_(std::move(probs)) {
  if (rows == 0 || cols == 0 || p_.size() != rows * cols) throw Error("Joint2: shape mismatch");
  check_probs(p_, "Joint2");
}

Joint2 Joint2::product(const Dist& row, const Dist& col) {
  std::vector<double> p(row.size() * col.size());
  for (std::size_t i = 0; i < row.size(); ++i)
    for (std::size_t j = 0; j < col.size(); ++j) p[i * col.size() + j] = row[i] * col[j];
  return Joint2(row.size(), col.size(), std::move(p));
}

Joint2 Joint2::from_conditional(const Dist& row, const CondDist& col_given_row) {
  if (col_given_row.num_rows() != row.size()) throw Error("Joint2: conditional row count");
  const std::size_t nc = col_given_row.num_outputs();
  std::vector<double> p(row.size() * nc);
  for (std::size_t i = 0; i < row.size(); ++i)
    for (std::size_t j = 0; j < nc; ++j) p[i * nc + j] = row[i] * col_given_row.at(i, j);
  return Joint2(row.size(), nc, std::move(p));
}

Dist Joint2::row_marginal() const {
  std::vector<double> m(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) m[i] += p_[i * cols_ + j];
  return Dist::normalized(std::move(m));
}

Dist Joint2::col_marginal() const {
  std::vector<double> m(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) m[j] += p_[i * cols_ + j];
  return Dist::normalized(std::move(m));
}

CondDist Joint2::col_given_row() const {
  std::vector<Dist> rows;
  rows.reserve(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    std::vector<double> r(p_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                          p_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
    double s = std::accumulate(r.begin(), r.end(), 0.0);
    rows.push_back(s > 0.0 ? Dist::normalized(std::move(r)) : Dist::uniform(cols_));
  }
  return CondDist(std::move(rows));
}

Joint2 Joint2::transpose() const {
  std::vector<double> t(p_.size());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t[j * rows_ + i] = p_[i * cols_ + j];
  return Joint2(cols_, rows_, std::move(t));
}

Joint3::Joint3(std::size_t nx, std::size_t nx2, std::size_t ny, std::vector<double> probs)
    : nx_(nx), nx2_(nx2), ny_(ny), p_(std::move(probs)) {
  if (nx == 0 || nx2 == 0 || ny == 0 || p_.size() != nx * nx2 * ny) {
    throw Error("Joint3: shape mismatch");
  }
  check_probs(p_, "Joint3");
}

Joint3 Joint3::from_coupling(const Joint2& q_xx, const CondDist& y_given_pair) {
  if (y_given_pair.num_rows() != q_xx.rows() * q_xx.cols()) throw Error("Joint3: row count");
  const std::size_t ny = y_given_pair.num_outputs();
  std::vector<double> p(q_xx.rows() * q_xx.cols() * ny);
  for (std::size_t r = 0; r < q_xx.rows() * q_xx.cols(); ++r)
    for (std::size_t y = 0; y < ny; ++y) p[r * ny + y] = q_xx.probs()[r] * y_given_pair.at(r, y);
  return Joint3(q_xx.rows(), q_xx.cols(), ny, std::move(p));
}

Joint2 Joint3::xy() const {
  std::vector<double> m(nx_ * ny_, 0.0);
  for (std::size_t x = 0; x < nx_; ++x)
    for (std::size_t x2 = 0; x2 < nx2_; ++x2)
      for (std::size_t y = 0; y < ny_; ++y) m[x * ny_ + y] += at(x, x2, y);
  return Joint2(nx_, ny_, std::move(m));
}

Joint2 Joint3::x2y() const {
  std::vector<double> m(nx2_ * ny_, 0.0);
  for (std::size_t x = 0; x < nx_; ++x)
    for (std::size_t x2 = 0; x2 < nx2_; ++x2)
      for (std::size_t y = 0; y < ny_; ++y) m[x2 * ny_ + y] += at(x, x2, y);
  return Joint2(nx2_, ny_, std::move(m));
}

Joint2 Joint3::xx2() const {
  std::vector<double> m(nx_ * nx2_, 0.0);
  for (std::size_t x = 0; x < nx_; ++x)
    for (std::size_t x2 = 0; x2 < nx2_; ++x2)
      for (std::size_t y = 0; y < ny_; ++y) m[x * nx2_ + x2] += at(x, x2, y);
  return Joint2(nx_, nx2_, std::move(m));
}

Channel::Channel(CondDist w, std::string name) : w_(std::move(w)), name_(std::move(name)) {
  const std::size_t nx = w_.num_rows(), ny = w_.num_outputs();
  log_w_.resize(nx * ny);
  support_.resize(nx * ny);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) {
      const double v = w_.at(x, y);
      support_[x * ny + y] = v > 0.0 ? 1 : 0;
      log_w_[x * ny + y] = v > 0.0 ? std::log(v) : -kInf;
    }
  }
}

Channel Channel::bsc(double crossover) {
  if (!(crossover >= 0.0 && crossover <= 1.0)) throw Error("bsc: crossover outside [0,1]");
  return Channel(CondDist({Dist({1.0 - crossover, crossover}), Dist({crossover, 1.0 - crossover})}),
                 "bsc");
}

Channel Channel::identity(std::size_t n) {
  std::vector<Dist> rows;
  for (std::size_t x = 0; x < n; ++x) rows.push_back(Dist::point_mass(n, x));
  return Channel(CondDist(std::move(rows)), "identity");
}

Channel Channel::relabel_inputs(std::span<const std::size_t> perm) const {
  if (perm.size() != inputs()) throw Error("relabel_inputs: permutation size");
  std::vector<Dist> rows(inputs());
  for (std::size_t x = 0; x < inputs(); ++x) rows[perm[x]] = w_[x];
  return Channel(CondDist(std::move(rows)), name_);
}

Channel Channel::relabel_outputs(std::span<const std::size_t> perm) const {
  if (perm.size() != outputs()) throw Error("relabel_outputs: permutation size");
  std::vector<Dist> rows;
  for (std::size_t x = 0; x < inputs(); ++x) {
    std::vector<double> r(outputs());
    for (std::size_t y = 0; y < outputs(); ++y) r[perm[y]] = w_.at(x, y);
    rows.emplace_back(std::move(r));
  }
  return Channel(CondDist(std::move(rows)), name_);
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double entropy(const Dist& d) { return entropy(d.probs()); }

double mutual_information(std::span<const double> joint, std::size_t rows, std::size_t cols) {
  double pr[16], pc[16];
  std::vector<double> big_r, big_c;
  double* r = pr;
  double* c = pc;
  if (rows > 16 || cols > 16) {
    big_r.assign(rows, 0.0);
    big_c.assign(cols, 0.0);
    r = big_r.data();
    c = big_c.data();
  } else {
    std::fill(pr, pr + rows, 0.0);
    std::fill(pc, pc + cols, 0.0);
  }
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      r[i] += joint[i * cols + j];
      c[j] += joint[i * cols + j];
    }
  double mi = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = joint[i * cols + j];
      if (v > 0.0) mi += v * std::log(v / (r[i] * c[j]));
    }
  return mi > 0.0 ? mi : 0.0;
}

double mutual_information(const Joint2& j) {
  return mutual_information(j.probs(), j.rows(), j.cols());
}

double conditional_entropy(const Joint2& j) {
  // H(R|C) = H(R,C) - H(C)
  const double h = entropy(j.probs()) - entropy(j.col_marginal());
  return h > 0.0 ? h : 0.0;
}

double kl_divergence(const Dist& p, const Dist& q) {
  if (p.size() != q.size()) throw Error("kl_divergence: alphabet mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d > 0.0 ? d : 0.0;
}

Joint2 empirical_joint(std::span<const int> x_seq, std::span<const int> y_seq, std::size_t nx,
                       std::size_t ny) {
  if (x_seq.size() != y_seq.size()) throw Error("empirical_joint: length mismatch");
  if (x_seq.empty()) throw Error("empirical_joint: empty sequences");
  std::vector<std::size_t> counts(nx * ny, 0);
  for (std::size_t i = 0; i < x_seq.size(); ++i) {
    if (x_seq[i] < 0 || static_cast<std::size_t>(x_seq[i]) >= nx || y_seq[i] < 0 ||
        static_cast<std::size_t>(y_seq[i]) >= ny) {
      throw Error("empirical_joint: symbol out of range");
    }
    ++counts[static_cast<std::size_t>(x_seq[i]) * ny + static_cast<std::size_t>(y_seq[i])];
  }
  const double n = static_cast<double>(x_seq.size());
  std::vector<double> p(nx * ny);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(counts[i]) / n;
  return Joint2(nx, ny, std::move(p));
}

Joint2 empirical_joint(std::span<const int> x_seq, std::span<const int> y_seq) {
  auto alphabet = [](std::span<const int> s) {
    int m = 0;
    for (int v : s) m = std::max(m, v);
    return static_cast<std::size_t>(m) + 1;
  };
  return empirical_joint(x_seq, y_seq, alphabet(x_seq), alphabet(y_seq));
}

std::uint64_t simplex_grid_count(std::size_t dim, std::size_t k) {
  if (dim == 0) return 0;
  // C(k + dim - 1, dim - 1), saturating
  const std::uint64_t n = k + dim - 1;
  std::uint64_t r = dim - 1;
  if (r > n - r) r = n - r;
  long double c = 1.0L;
  for (std::uint64_t i = 1; i <= r; ++i) c = c * static_cast<long double>(n - r + i) / i;
  if (c > 1.8e19L) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(std::llround(c));
}

std::vector<std::vector<int>> compositions(std::size_t dim, std::size_t k, std::size_t cap) {
  if (dim == 0) throw Error("simplex_grid: dim must be >= 1");
  if (k == 0) throw Error("simplex_grid: k must be >= 1");
  if (simplex_grid_count(dim, k) > cap) {
    throw Error("simplex_grid: " + std::to_string(simplex_grid_count(dim, k)) +
                " points exceed cap " + std::to_string(cap));
  }
  std::vector<std::vector<int>> out;
  std::vector<int> cur(dim, 0);
  // Lexicographic ascending: first coordinate slowest, smallest first.
  auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
    if (pos + 1 == dim) {
      cur[pos] = left;
      out.push_back(cur);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      cur[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, static_cast<int>(k));
  return out;
}

std::vector<Dist> simplex_grid(std::size_t dim, std::size_t k, std::size_t cap) {
  std::vector<Dist> out;
  for (const auto& c : compositions(dim, k, cap)) {
    std::vector<double> p(dim);
    for (std::size_t i = 0; i < dim; ++i) p[i] = static_cast<double>(c[i]) / static_cast<double>(k);
    out.emplace_back(std::move(p));
  }
  return out;
}

namespace {

std::vector<int> grid_numerators(const Dist& q, std::size_t k) {
  std::vector<int> a(q.size());
  int total = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double scaled = q[i] * static_cast<double>(k);
    const double r = std::round(scaled);
    if (std::abs(scaled - r) > 1e-9) return {};
    a[i] = static_cast<int>(r);
    total += a[i];
  }
  if (total != static_cast<int>(k)) return {};
  return a;
}

}  // namespace

bool is_grid_aligned(const Dist& q, std::size_t k) { return !grid_numerators(q, k).empty(); }

Dist align_to_grid(const Dist& q, std::size_t k) {
  if (k == 0) throw Error("align_to_grid: k must be >= 1");
  std::vector<int> a(q.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int total = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double scaled = q[i] * static_cast<double>(k);
    a[i] = static_cast<int>(std::floor(scaled + 1e-12));
    total += a[i];
    rem.emplace_back(scaled - a[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  for (std::size_t i = 0; total < static_cast<int>(k); ++i, ++total) ++a[rem[i % rem.size()].second];
  std::vector<double> p(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) p[i] = static_cast<double>(a[i]) / static_cast<double>(k);
  return Dist(std::move(p));
}

std::vector<Joint2> coupling_grid(const Dist& q, std::size_t k, std::size_t cap) {
  const auto a = grid_numerators(q, k);
  if (a.empty()) throw Error("coupling_grid: composition is not aligned to the 1/k grid");
  const std::size_t n = q.size();
  const auto rows = compositions(n, k, cap);
  const std::uint64_t total = static_cast<std::uint64_t>(std::pow(static_cast<double>(rows.size()),
                                                                  static_cast<double>(n)));
  if (total > cap) throw Error("coupling_grid: candidate count exceeds cap");

  // Rows of symbols with zero composition are irrelevant; pin them to the first
  // lattice row so each coupling is emitted once.
  std::vector<std::size_t> choice(n, 0);
  std::vector<Joint2> out;
  const double k2 = static_cast<double>(k) * static_cast<double>(k);
  auto rec = [&](auto&& self, std::size_t x) -> void {
    if (x == n) {
      for (std::size_t x2 = 0; x2 < n; ++x2) {
        long long s = 0;
        for (std::size_t xx = 0; xx < n; ++xx) s += static_cast<long long>(a[xx]) * rows[choice[xx]][x2];
        if (s != static_cast<long long>(k) * a[x2]) return;
      }
      std::vector<double> p(n * n);
      for (std::size_t xx = 0; xx < n; ++xx)
        for (std::size_t x2 = 0; x2 < n; ++x2)
          p[xx * n + x2] = static_cast<double>(a[xx] * rows[choice[xx]][x2]) / k2;
      out.emplace_back(n, n, std::move(p));
      return;
    }
    const std::size_t limit = a[x] == 0 ? 1 : rows.size();
    for (std::size_t c = 0; c < limit; ++c) {
      choice[x] = c;
      self(self, x + 1);
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace explab
