#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "doctest.h"

#include "explab/prob.hpp"

using namespace explab;

namespace {

constexpr double kLog2 = 0.69314718055994530942;

// Direct long double evaluation, no shared code with the library.
long double h_binary(long double p) { return -p * std::log(p) - (1 - p) * std::log(1 - p); }

long double mi_double_sum(const std::vector<std::vector<double>>& q) {
  const std::size_t r = q.size(), c = q[0].size();
  std::vector<long double> row(r, 0), col(c, 0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      row[i] += q[i][j];
      col[j] += q[i][j];
    }
  long double s = 0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (q[i][j] > 0) s += q[i][j] * std::log(q[i][j] / (row[i] * col[j]));
  return s;
}

std::uint64_t binom(std::uint64_t n, std::uint64_t k) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Joint2 diag_half() { return Joint2(2, 2, {0.5, 0, 0, 0.5}); }
Joint2 antidiag_half() { return Joint2(2, 2, {0, 0.5, 0.5, 0}); }

}  // namespace

TEST_CASE("entropy") {
  CHECK(entropy(Dist::uniform(2)) == doctest::Approx(kLog2).epsilon(1e-12));
  CHECK(entropy(Dist::point_mass(3, 1)) == 0.0);
  const double h = entropy(Dist({0.9, 0.1}));
  CHECK(std::abs(h - static_cast<double>(h_binary(0.1L))) < 1e-12);
  CHECK(std::abs(h - 0.325083) < 1e-6);
}

TEST_CASE("conditional entropy") {
  CHECK(conditional_entropy(Joint2::product(Dist::uniform(2), Dist::uniform(2))) ==
        doctest::Approx(kLog2).epsilon(1e-12));
  CHECK(std::abs(conditional_entropy(diag_half())) < 1e-15);
  // Rows = Y, columns = X so that H(row | col) = H(Y|X) = h(0.1).
  const Joint2 yx(2, 2, {0.45, 0.05, 0.05, 0.45});
  CHECK(std::abs(conditional_entropy(yx) - static_cast<double>(h_binary(0.1L))) < 1e-12);
}

TEST_CASE("mutual information") {
  CHECK(std::abs(mutual_information(Joint2::product(Dist({0.3, 0.7}), Dist({0.2, 0.5, 0.3})))) < 1e-12);
  CHECK(mutual_information(diag_half()) == doctest::Approx(kLog2).epsilon(1e-12));
  const Joint2 bsc(2, 2, {0.45, 0.05, 0.05, 0.45});
  const long double oracle = mi_double_sum({{0.45, 0.05}, {0.05, 0.45}});
  CHECK(std::abs(mutual_information(bsc) - static_cast<double>(oracle)) < 1e-12);
  // Printed reference value, truncated rather than rounded at 6 places.
  CHECK(std::abs(mutual_information(bsc) - 0.368063) < 2e-6);
}

TEST_CASE("mutual information identity on lattice joints") {
  for (const auto& p : simplex_grid(6, 6)) {
    const Joint2 j(2, 3, p.vec());
    const double lhs = mutual_information(j);
    const double rhs = entropy(j.row_marginal()) - conditional_entropy(j);
    CHECK(std::abs(lhs - std::max(0.0, rhs)) < 1e-10);
    CHECK(lhs >= 0.0);
  }
}

TEST_CASE("kl divergence") {
  const Dist p({0.2, 0.8});
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(Dist({1, 0}), Dist({0.5, 0.5})) == doctest::Approx(kLog2).epsilon(1e-12));
  CHECK(kl_divergence(Dist({0.5, 0.5}), Dist({1, 0})) == std::numeric_limits<double>::infinity());
}

TEST_CASE("kl divergence is positive off the diagonal") {
  for (std::size_t dim = 1; dim <= 3; ++dim)
    for (std::size_t k = 1; k <= 8; ++k) {
      const auto grid = simplex_grid(dim, k);
      for (const auto& p : grid)
        for (const auto& q : grid) {
          const double d = kl_divergence(p, q);
          if (p == q)
            CHECK(std::abs(d) < 1e-12);
          else
            CHECK(d > 1e-12);
        }
    }
}

TEST_CASE("empirical joint") {
  const std::vector<int> a{0, 0, 1, 1};
  CHECK(empirical_joint(a, a) == diag_half());
  const std::vector<int> x2{0, 1}, y2{1, 0};
  CHECK(empirical_joint(x2, y2) == antidiag_half());
  const std::vector<int> x{0, 0, 0, 1}, y{0, 1, 0, 1};
  CHECK(empirical_joint(x, y) == Joint2(2, 2, {0.5, 0.25, 0, 0.25}));
  const std::vector<int> shorter{0, 1, 0};
  CHECK_THROWS_AS(empirical_joint(x, shorter), Error);
}

TEST_CASE("empirical joint marginals match symbol counts") {
  const std::vector<int> x{0, 2, 1, 1, 0, 2, 2, 0, 1, 1};
  const std::vector<int> y{1, 1, 0, 1, 0, 0, 1, 1, 1, 0};
  const Joint2 j = empirical_joint(x, y, 3, 2);
  std::vector<int> cx(3, 0), cy(2, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++cx[static_cast<std::size_t>(x[i])];
    ++cy[static_cast<std::size_t>(y[i])];
  }
  for (std::size_t a = 0; a < 3; ++a) CHECK(j.row_marginal()[a] * 10 == doctest::Approx(cx[a]));
  for (std::size_t b = 0; b < 2; ++b) CHECK(j.col_marginal()[b] * 10 == doctest::Approx(cy[b]));
}

TEST_CASE("simplex grid") {
  const auto g = simplex_grid(2, 2);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == Dist({0, 1}));
  CHECK(g[1] == Dist({0.5, 0.5}));
  CHECK(g[2] == Dist({1, 0}));
  for (std::size_t k = 1; k <= 5; ++k) {
    const auto one = simplex_grid(1, k);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == Dist({1}));
  }
  CHECK(simplex_grid(3, 4).size() == 15);
  for (std::size_t dim = 1; dim <= 4; ++dim)
    for (std::size_t k = 1; k <= 10; ++k) {
      CHECK(simplex_grid(dim, k).size() == binom(k + dim - 1, dim - 1));
      CHECK(simplex_grid_count(dim, k) == binom(k + dim - 1, dim - 1));
    }
  CHECK_THROWS_AS(simplex_grid(4, 10, 100), Error);
}

TEST_CASE("coupling grid of the uniform binary composition at k=2") {
  const auto g = coupling_grid(Dist::uniform(2), 2);
  std::set<std::vector<double>> got;
  for (const auto& j : g) got.insert(j.vec());
  const std::set<std::vector<double>> want{
      {0.5, 0, 0, 0.5}, {0, 0.5, 0.5, 0}, {0.25, 0.25, 0.25, 0.25}};
  CHECK(got == want);
}

TEST_CASE("coupling grid of a degenerate composition") {
  for (std::size_t k : {1, 3, 8}) {
    const auto g = coupling_grid(Dist({1, 0}), k);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == Joint2(2, 2, {1, 0, 0, 0}));
  }
}

TEST_CASE("coupling grid matches a brute-force filter") {
  // Brute force: every pair of conditional rows on the 1/k lattice, kept when
  // both marginals equal q exactly.
  struct Case {
    Dist q;
    std::size_t k;
  };
  for (const auto& c : {Case{Dist::uniform(2), 4}, Case{Dist::uniform(2), 8}, Case{Dist({0.25, 0.75}), 4},
                        Case{Dist({1.0 / 3, 1.0 / 3, 1.0 / 3}), 3}, Case{Dist({0.5, 0.25, 0.25}), 4}}) {
    const std::size_t n = c.q.size();
    const auto rows = simplex_grid(n, c.k);
    std::set<std::vector<long long>> want;
    std::vector<std::size_t> pick(n, 0);
    const auto k = static_cast<long long>(c.k);
    std::vector<long long> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = std::llround(c.q[i] * static_cast<double>(c.k));
    for (;;) {
      std::vector<long long> num(n * n);
      for (std::size_t x = 0; x < n; ++x)
        for (std::size_t x2 = 0; x2 < n; ++x2)
          num[x * n + x2] = a[x] * std::llround(rows[pick[x]][x2] * static_cast<double>(c.k));
      bool ok = true;
      for (std::size_t x2 = 0; x2 < n; ++x2) {
        long long s = 0;
        for (std::size_t x = 0; x < n; ++x) s += num[x * n + x2];
        ok = ok && s == a[x2] * k;
      }
      if (ok) want.insert(num);
      std::size_t i = 0;
      while (i < n && ++pick[i] == rows.size()) pick[i++] = 0;
      if (i == n) break;
    }
    std::set<std::vector<long long>> got;
    for (const auto& j : coupling_grid(c.q, c.k)) {
      std::vector<long long> num;
      for (double v : j.probs()) num.push_back(std::llround(v * static_cast<double>(k * k)));
      got.insert(num);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(j.row_marginal()[i] - c.q[i]) < 1e-12);
        CHECK(std::abs(j.col_marginal()[i] - c.q[i]) < 1e-12);
      }
    }
    CHECK(got == want);
  }
}

TEST_CASE("coupling grid rejects unaligned compositions") {
  CHECK_THROWS_AS(coupling_grid(Dist({0.3, 0.7}), 4), Error);
}

TEST_CASE("distribution validation") {
  CHECK_THROWS_AS(Dist({0.5, 0.6}), Error);
  CHECK_THROWS_AS(Dist({-0.1, 1.1}), Error);
  CHECK_THROWS_AS(Alphabet(0), Error);
  CHECK_NOTHROW(Dist({0.5, 0.5 + 1e-13}));
}

TEST_CASE("channel support mask") {
  const Channel ch(CondDist({Dist({1, 0, 0}), Dist({0.2, 0.3, 0.5})}));
  CHECK(ch.support(0, 0));
  CHECK_FALSE(ch.support(0, 1));
  CHECK(ch.log_w(0, 2) == -std::numeric_limits<double>::infinity());
  CHECK(ch.log_w(1, 1) == doctest::Approx(std::log(0.3)));
}
