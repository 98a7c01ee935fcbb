#pragma once

// Exact solver for the convex core of Gamma and Gamma-tilde. With the joint
// Q_{X'Y} pinned to J', the minimization over Q_{Y|XX'} of
//   sum q(x,x') D(Q(.|x,x') || W(.|x))
// subject to g(Q_XY) <= gamma (hard form), or with the penalty
// max{beta, g(Q_XY) - gamma} added (soft form), is convex for both metrics.
// It is solved through its Lagrange dual
//   sum_r q_r (-log sum_y W(y|x) M(y|x)^{-lambda} e^{nu(x',y)}) + <nu, J'> + lambda k0 + c0
// where M = W for ML. For MMI, -H(Y|X) = max_S sum Q log S puts M = S, which is
// maximized on the outside. The dual is concave in (nu, lambda) and is
// maximized by projected Newton steps.

#include <cstddef>
#include <span>
#include <vector>

#include "explab/exponents.hpp"

namespace explab::detail {

struct PairDualInput {
  std::size_t nx = 0, ny = 0;
  std::span<const double> q_xx;    // nx*nx
  std::span<const double> logw;    // nx*ny
  std::span<const double> joint2;  // J' over X' x Y, nx*ny
  MetricKind metric = MetricKind::ML;
  double gamma = 0.0;  // g(J')
  bool soft = false;
  double beta = 0.0;   // soft form only, >= 0
};

struct PairDualResult {
  double value = 0.0;         // +inf when no conditional matches J'
  std::vector<double> rows;   // minimizing Q_{Y|XX'}, rows x*nx+x'; W(.|x) where q(x,x') = 0
  double lambda = 0.0;
  std::size_t iterations = 0;
};

PairDualResult solve_pair_dual(const PairDualInput& in);

}  // namespace explab::detail
