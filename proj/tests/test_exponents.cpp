#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "doctest.h"

#include "explab/exponents.hpp"

using namespace explab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent binary-alphabet oracles. A joint over X~ x Y with marginals
// (1/2, 1/2) and (qy0, 1 - qy0) is fixed by t = Q(0,0).
struct BinaryOracle {
  Channel ch;
  bool mmi = false;

  static double xlogx_ratio(double a, double b) { return a > 0 ? a * std::log(a / b) : 0.0; }

  static std::vector<double> joint(double t, double qy0) { return {t, 0.5 - t, qy0 - t, 0.5 - qy0 + t}; }

  static double mi(const std::vector<double>& q) {
    const double r0 = q[0] + q[1], r1 = q[2] + q[3], c0 = q[0] + q[2], c1 = q[1] + q[3];
    return xlogx_ratio(q[0], r0 * c0) + xlogx_ratio(q[1], r0 * c1) + xlogx_ratio(q[2], r1 * c0) +
           xlogx_ratio(q[3], r1 * c1);
  }

  double g(const std::vector<double>& q) const {
    if (mmi) return mi(q);
    double s = 0.0;
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t y = 0; y < 2; ++y) {
        const double v = q[x * 2 + y];
        if (v <= 0) continue;
        if (ch(x, y) <= 0) return -kInf;
        s += v * std::log(ch(x, y));
      }
    return s;
  }

  // Feasible interval {t : I <= R}; I is convex in t with minimum 0 at the product.
  std::pair<double, double> interval(double R, double qy0) const {
    const double lo = std::max(0.0, qy0 - 0.5), hi = std::min(0.5, qy0), t0 = 0.5 * qy0;
    auto edge = [&](double inside, double outside) {
      if (mi(joint(outside, qy0)) <= R) return outside;
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (inside + outside);
        (mi(joint(mid, qy0)) <= R ? inside : outside) = mid;
      }
      return inside;
    };
    return {edge(t0, lo), edge(t0, hi)};
  }

  // max of a concave function of t on [a, b].
  static double ternary_max(const std::function<double(double)>& f, double a, double b) {
    for (int i = 0; i < 300; ++i) {
      const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
      (f(m1) < f(m2) ? a : b) = f(m1) < f(m2) ? m1 : m2;
    }
    return f(0.5 * (a + b));
  }

  double a(double R, double qy0) const {
    const auto [lo, hi] = interval(R, qy0);
    // ML: g is linear in t. MMI: I is convex in t. Either way an endpoint wins.
    return std::max(g(joint(lo, qy0)), g(joint(hi, qy0)));
  }

  double alpha(double R, double qy0) const {
    const auto [lo, hi] = interval(R, qy0);
    if (mmi) return R;
    return ternary_max([&](double t) { return g(joint(t, qy0)) - mi(joint(t, qy0)) + R; }, lo, hi);
  }
};

double bern_div(double p, double w) { return BinaryOracle::xlogx_ratio(p, w) + BinaryOracle::xlogx_ratio(1 - p, 1 - w); }

// Lattice search over the active rows p_r = Q(Y=1 | x, x') of a binary coupling.
// soft = false: Gamma with its hard constraint; soft = true: Gamma-tilde.
double inner_grid_oracle(const std::vector<double>& q, double R, const BinaryOracle& o, int k, bool soft) {
  std::vector<std::size_t> active;
  for (std::size_t r = 0; r < 4; ++r)
    if (q[r] > 0) active.push_back(r);
  std::unordered_map<long long, double> thr;
  std::vector<int> idx(active.size(), 0);
  double best = kInf;
  for (;;) {
    double p[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < active.size(); ++i) p[active[i]] = static_cast<double>(idx[i]) / k;
    std::vector<double> qxy(4, 0.0), qx2y(4, 0.0);
    double f = 0.0;
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t x2 = 0; x2 < 2; ++x2) {
        const double w = q[x * 2 + x2], pr = p[x * 2 + x2];
        if (w <= 0) continue;
        f += w * bern_div(pr, o.ch(x, 1));
        qxy[x * 2 + 0] += w * (1 - pr);
        qxy[x * 2 + 1] += w * pr;
        qx2y[x2 * 2 + 0] += w * (1 - pr);
        qx2y[x2 * 2 + 1] += w * pr;
      }
    if (f < best) {
      const double qy0 = qxy[0] + qxy[2];
      const long long key = std::llround(qy0 * 1e12);
      auto it = thr.find(key);
      if (it == thr.end()) it = thr.emplace(key, soft ? o.alpha(R, qy0) : o.a(R, qy0)).first;
      const double g1 = o.g(qxy), g2 = o.g(qx2y);
      const double top = std::max(g1, it->second);
      if (soft) {
        const double pen = g2 == -kInf ? kInf : std::max(0.0, top - g2);
        best = std::min(best, f + pen);
      } else if (g2 >= top) {
        best = f;
      }
    }
    std::size_t i = 0;
    while (i < idx.size() && ++idx[i] > k) idx[i++] = 0;
    if (i == idx.size()) break;
  }
  return best;
}

Joint2 coupling(double c) { return Joint2(2, 2, {0.5 - c, c, c, 0.5 - c}); }

const Dist kUniform = Dist::uniform(2);

}  // namespace

TEST_CASE("decoding metrics") {
  const auto ch = Channel::bsc(0.1);
  const Joint2 q(2, 2, {0.45, 0.05, 0.05, 0.45});
  CHECK(DecodingMetric::ml().evaluate(q, ch) == doctest::Approx(0.9 * std::log(0.9) + 0.1 * std::log(0.1)));
  CHECK(DecodingMetric::mmi().evaluate(q, ch) == doctest::Approx(BinaryOracle::mi(q.vec())));
  const Channel z(CondDist({Dist({1, 0}), Dist({0.5, 0.5})}));
  CHECK(DecodingMetric::ml().evaluate(Joint2(2, 2, {0.25, 0.25, 0.25, 0.25}), z) == -kInf);
  CHECK(parse_metric("mmi") == DecodingMetric::mmi());
  CHECK_THROWS_AS(parse_metric("map"), Error);
}

TEST_CASE("option validation") {
  OptimizerOptions o;
  CHECK_NOTHROW(o.validate());
  o.refine_shrink = 1.0;
  CHECK_THROWS_AS(o.validate(), Error);
  CHECK(OptimizerOptions::for_inputs(3).grid_k == 4);
}

TEST_CASE("MMI threshold at zero rate and above the composition entropy") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  for (double qy0 : {0.3, 0.5, 0.8}) {
    const Dist qy({qy0, 1 - qy0});
    CHECK(std::abs(a_threshold(0.0, qy, DecodingMetric::mmi(), ch, kUniform, o)) < 1e-6);
    const double big = a_threshold(1.0, qy, DecodingMetric::mmi(), ch, kUniform, o);
    const BinaryOracle ref{ch, true};
    const double want = ref.a(1.0, qy0);
    CHECK(std::abs(big - want) < 1e-6);
  }
}

TEST_CASE("ML thresholds on BSC(0.1) match the transport oracle") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const BinaryOracle ref{ch, false};
  for (double qy0 : {0.5, 0.35}) {
    const Dist qy({qy0, 1 - qy0});
    for (double R : {0.05, 0.2}) {
      const double a = a_threshold(R, qy, DecodingMetric::ml(), ch, kUniform, o);
      const double al = alpha_threshold(R, qy, DecodingMetric::ml(), ch, kUniform, o);
      CHECK(std::abs(a - ref.a(R, qy0)) < 1e-5);
      CHECK(std::abs(al - ref.alpha(R, qy0)) < 1e-5);
      CHECK(al >= a - o.constraint_slack);
    }
  }
}

TEST_CASE("alpha is exactly R for MMI") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  CHECK(std::abs(alpha_threshold(0.0, kUniform, DecodingMetric::mmi(), ch, kUniform, o)) < 1e-9);
  CHECK(alpha_threshold(0.2, Dist({0.4, 0.6}), DecodingMetric::mmi(), ch, kUniform, o) ==
        doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("thresholds are nondecreasing in the rate") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const Dist qy({0.45, 0.55});
  for (const auto& m : {DecodingMetric::ml(), DecodingMetric::mmi()}) {
    double pa = -kInf, pal = -kInf;
    for (double R = 0.0; R <= 0.5; R += 0.05) {
      const double a = a_threshold(R, qy, m, ch, kUniform, o);
      const double al = alpha_threshold(R, qy, m, ch, kUniform, o);
      CHECK(a >= pa - 1e-6);
      CHECK(al >= pal - 1e-6);
      pa = a;
      pal = al;
    }
  }
}

TEST_CASE("Gamma at the independent coupling matches the lattice oracle") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const Joint2 indep = coupling(0.25);
  const double v = gamma(indep, 0.1, DecodingMetric::ml(), ch, kUniform, o);
  const double oracle = inner_grid_oracle(indep.vec(), 0.1, BinaryOracle{ch, false}, 64, false);
  // The lattice oracle is feasible, so it bounds the optimum from above; its
  // 1/64 spacing leaves a gap of a few 1e-3 at a boundary optimum.
  CHECK(v <= oracle + 1e-6);
  CHECK(v >= oracle - 5e-3);
}

TEST_CASE("Gamma at the diagonal coupling is the smallest at zero rate") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const double diag = gamma(coupling(0.0), 0.0, DecodingMetric::ml(), ch, kUniform, o);
  for (const auto& c : coupling_grid(kUniform, 8))
    CHECK(diag <= gamma(c, 0.0, DecodingMetric::ml(), ch, kUniform, o) + 1e-6);
}

TEST_CASE("Gamma is infinite when the constraint cannot be met") {
  // On the noiseless channel Y = X, so Q_{X'Y} sits off the support whenever X' != X.
  const auto ch = Channel::identity(2);
  const auto o = OptimizerOptions::for_inputs(2);
  const auto r = gamma_detail(coupling(0.5), 0.1, DecodingMetric::ml(), ch, kUniform, o);
  CHECK(r.value == kInf);
  CHECK_FALSE(r.diagnostics.feasible);
}

TEST_CASE("Gamma is nondecreasing in the rate") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  for (double c : {0.125, 0.25}) {
    double prev = -kInf;
    for (double R : {0.0, 0.05, 0.1, 0.2, 0.3}) {
      const double v = gamma(coupling(c), R, DecodingMetric::ml(), ch, kUniform, o);
      CHECK(v >= prev - 1e-6);
      prev = v;
    }
  }
}

TEST_CASE("Gamma-tilde does not exceed Gamma below the anti-diagonal coupling") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  for (const auto& m : {DecodingMetric::ml(), DecodingMetric::mmi()})
    for (double c : {0.0, 0.125, 0.25, 0.375})
      for (double R : {0.0, 0.1, 0.2}) {
        const double gt = gamma_tilde(coupling(c), R, m, ch, kUniform, o);
        const double g = gamma(coupling(c), R, m, ch, kUniform, o);
        CHECK(gt <= g + 1e-6);
      }
}

TEST_CASE("Gamma-tilde at the diagonal coupling with an inactive clamp") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const double g_w = 0.9 * std::log(0.9) + 0.1 * std::log(0.1);
  for (double R : {0.0, 0.1}) {
    // With Q_{Y|XX'} = W the clamp is zero whenever alpha <= g(Q_X x W).
    REQUIRE(alpha_threshold(R, kUniform, DecodingMetric::ml(), ch, kUniform, o) <= g_w);
    // -sum q log sum_y W(y|x) = 0.
    CHECK(std::abs(gamma_tilde(coupling(0.0), R, DecodingMetric::ml(), ch, kUniform, o)) < 1e-6);
  }
}

TEST_CASE("Gamma-tilde at the anti-diagonal coupling matches the lattice oracle") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const Joint2 anti = coupling(0.5);
  const double v = gamma_tilde(anti, 0.1, DecodingMetric::ml(), ch, kUniform, o);
  const double oracle = inner_grid_oracle(anti.vec(), 0.1, BinaryOracle{ch, false}, 1024, true);
  CHECK(v <= oracle + 1e-6);
  CHECK(v >= oracle - 1e-4);
}

TEST_CASE("Gamma-tilde exceeds Gamma at the anti-diagonal coupling for R = 0.2") {
  // alpha > a, so the soft clamp can cost more than the hard constraint. The
  // coupling has I(X;X') = log 2 and lies outside both outer feasible sets.
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const Joint2 anti = coupling(0.5);
  const BinaryOracle bo{ch, false};
  const double hard = inner_grid_oracle(anti.vec(), 0.2, bo, 256, false);
  const double soft = inner_grid_oracle(anti.vec(), 0.2, bo, 256, true);
  REQUIRE(soft > hard + 0.02);
  const double g = gamma(anti, 0.2, DecodingMetric::ml(), ch, kUniform, o);
  const double gt = gamma_tilde(anti, 0.2, DecodingMetric::ml(), ch, kUniform, o);
  CHECK(g <= hard + 1e-6);
  CHECK(g >= hard - 5e-3);
  CHECK(gt <= soft + 1e-6);
  CHECK(gt >= soft - 5e-3);
  CHECK(gt > g);
}

TEST_CASE("random coding exponent") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const double cap = std::log(2.0) + 0.9 * std::log(0.9) + 0.1 * std::log(0.1);
  CHECK(random_coding_exponent(RatePoint{cap + 0.01, kUniform}, ch, o) <= 1e-9);
  // Lattice oracle over the two Bernoulli rows of Q_{Y|X}.
  double oracle = kInf;
  const int k = 128;
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= k; ++j) {
      const double p0 = static_cast<double>(i) / k, p1 = static_cast<double>(j) / k;
      const double d = 0.5 * bern_div(p0, 0.1) + 0.5 * bern_div(p1, 0.9);
      const double info = BinaryOracle::mi({0.5 * (1 - p0), 0.5 * p0, 0.5 * (1 - p1), 0.5 * p1});
      oracle = std::min(oracle, d + info);
    }
  const double e0 = random_coding_exponent(RatePoint{0.0, kUniform}, ch, o);
  CHECK(e0 <= oracle + 1e-9);
  CHECK(e0 >= oracle - 1e-4);
  double prev = kInf;
  for (double R = 0.0; R <= 0.4; R += 0.05) {
    const double e = random_coding_exponent(RatePoint{R, kUniform}, ch, o);
    CHECK(e <= prev + 1e-9);
    CHECK(e >= 0.0);
    prev = e;
  }
}

TEST_CASE("exponents at zero rate collapse to the independent coupling") {
  // I(X;X') <= 0 holds up to the final slack (~1e-9), which admits couplings
  // about its square root away from the product.
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const RatePoint rp{0.0, kUniform};
  const double g = gamma(coupling(0.25), 0.0, DecodingMetric::ml(), ch, kUniform, o);
  const auto trc = trc_exponent(rp, DecodingMetric::ml(), ch, o);
  CHECK(trc.value <= g + 1e-6);
  CHECK(trc.value >= g - 1e-4);
  const double gt = gamma_tilde(coupling(0.25), 0.0, DecodingMetric::ml(), ch, kUniform, o);
  const auto ex = expurgated_exponent(rp, DecodingMetric::ml(), ch, o);
  CHECK(ex.value <= gt + 1e-6);
  CHECK(ex.value >= gt - 1e-4);
}

TEST_CASE("TRC witnesses reproduce the reported value") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  for (double R : {0.1, 0.2}) {
    const auto r = trc_exponent(RatePoint{R, kUniform}, DecodingMetric::ml(), ch, o);
    const double f = conditional_divergence(r.argmin_coupling, r.argmin_channel, ch);
    const double again = f + mutual_information(r.argmin_coupling) - R;
    CHECK(std::abs(again - r.raw_value) < o.value_tol);
    CHECK(r.argmin_coupling.row_marginal()[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.argmin_coupling.col_marginal()[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(mutual_information(r.argmin_coupling) <= 2 * R + o.constraint_slack);
  }
}

TEST_CASE("TRC and expurgated exponents dominate the random coding exponent") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  for (double R : {0.05, 0.2, 0.3}) {
    const RatePoint rp{R, kUniform};
    const double er = random_coding_exponent(rp, ch, o);
    CHECK(trc_exponent(rp, DecodingMetric::ml(), ch, o).value >= er - 1e-6);
    CHECK(expurgated_exponent(rp, DecodingMetric::ml(), ch, o).value >= er - 1e-6);
  }
  CHECK(trc_exponent(RatePoint{0.4, kUniform}, DecodingMetric::ml(), ch, o).value <= o.value_tol);
}

TEST_CASE("sweeps") {
  const auto ch = Channel::bsc(0.1);
  const auto o = OptimizerOptions::for_inputs(2);
  const std::vector<double> none;
  CHECK(sweep(none, kUniform, DecodingMetric::ml(), ch, o, ExponentKind::Trc).records.empty());

  const std::vector<double> one{0.15};
  const auto single = sweep(one, kUniform, DecodingMetric::ml(), ch, o, ExponentKind::Trc);
  REQUIRE(single.records.size() == 1);
  REQUIRE(single.records[0].ok);
  CHECK(single.records[0].result->value ==
        trc_exponent(RatePoint{0.15, kUniform}, DecodingMetric::ml(), ch, o).value);

  const std::vector<double> rates{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35};
  const auto curve = sweep(rates, kUniform, DecodingMetric::ml(), ch, o, ExponentKind::Trc);
  REQUIRE(curve.records.size() == rates.size());
  for (std::size_t i = 1; i < rates.size(); ++i)
    CHECK(curve.records[i].result->value <= curve.records[i - 1].result->value + o.value_tol);

  const std::vector<double> bad{0.1, 0.2};
  const auto flagged = sweep(bad, Dist({0.3, 0.7}), DecodingMetric::ml(), ch, o, ExponentKind::Random);
  REQUIRE(flagged.records.size() == 2);
  const std::vector<double> descending{0.2, 0.1};
  CHECK_THROWS_AS(sweep(descending, kUniform, DecodingMetric::ml(), ch, o, ExponentKind::Trc), Error);
}
