#pragma once

// Flat-array kernels used in the inner loops of the exponent and dual searches.
// Layouts: coupling q_xx is nx*nx row-major; a conditional Q_{Y|XX'} is
// (nx*nx) rows of ny; joints over X x Y are nx*ny.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "explab/prob.hpp"

namespace explab::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// sum_y q log(q / w) for one row; +inf if q puts mass outside w's support.
inline double row_divergence(const double* q, const double* logw, std::size_t ny) {
  double d = 0.0;
  for (std::size_t y = 0; y < ny; ++y) {
    if (q[y] <= 0.0) continue;
    if (logw[y] == -kInf) return kInf;
    d += q[y] * (std::log(q[y]) - logw[y]);
  }
  return d;
}

// E_Q[log W] over a joint on X x Y; -inf if Q touches a zero of W.
inline double expected_log_w(std::span<const double> joint, std::span<const double> logw) {
  double s = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i] <= 0.0) continue;
    if (logw[i] == -kInf) return -kInf;
    s += joint[i] * logw[i];
  }
  return s;
}

// -E log W(Y|X) - H(Y|X,X') = sum over pairs of q(x,x') D(Q(.|x,x') || W(.|x)).
inline double conditional_divergence(std::span<const double> q_xx, std::span<const double> rows,
                                     std::span<const double> logw, std::size_t nx,
                                     std::size_t ny) {
  double f = 0.0;
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t x2 = 0; x2 < nx; ++x2) {
      const double w = q_xx[x * nx + x2];
      if (w <= 0.0) continue;
      const double d = row_divergence(&rows[(x * nx + x2) * ny], &logw[x * ny], ny);
      if (d == kInf) return kInf;
      f += w * d;
    }
  return f;
}

struct TripleMarginals {
  std::vector<double> xy, x2y, y;
};

inline void triple_marginals(std::span<const double> q_xx, std::span<const double> rows,
                             std::size_t nx, std::size_t ny, TripleMarginals& m) {
  m.xy.assign(nx * ny, 0.0);
  m.x2y.assign(nx * ny, 0.0);
  m.y.assign(ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t x2 = 0; x2 < nx; ++x2) {
      const double w = q_xx[x * nx + x2];
      if (w <= 0.0) continue;
      for (std::size_t y = 0; y < ny; ++y) {
        const double v = w * rows[(x * nx + x2) * ny + y];
        m.xy[x * ny + y] += v;
        m.x2y[x2 * ny + y] += v;
        m.y[y] += v;
      }
    }
}

inline double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double t : v) m = std::max(m, t);
  if (m == -kInf || m == kInf) return m;
  double s = 0.0;
  for (double t : v) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace explab::detail
