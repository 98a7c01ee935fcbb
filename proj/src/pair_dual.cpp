#include "pair_dual.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "kernels.hpp"

namespace explab::detail {

namespace {

constexpr double kLambdaMax = 1e7;
constexpr int kNewtonIters = 200;
constexpr int kOuterIters = 200;
constexpr int kFixedPointIters = 50;

struct Row {
  std::size_t x = 0, x2 = 0;
  double q = 0.0;
  std::vector<std::size_t> ys;
};

class Dual {
 public:
  explicit Dual(const PairDualInput& in) : in_(in), nx_(in.nx), ny_(in.ny) {
    for (std::size_t x = 0; x < nx_; ++x)
      for (std::size_t x2 = 0; x2 < nx_; ++x2) {
        const double q = in.q_xx[x * nx_ + x2];
        if (q <= 0.0) continue;
        Row r{x, x2, q, {}};
        for (std::size_t y = 0; y < ny_; ++y)
          if (in.logw[x * ny_ + y] > -kInf && in.joint2[x2 * ny_ + y] > 0.0) r.ys.push_back(y);
        if (r.ys.empty()) infeasible = true;
        rows_.push_back(std::move(r));
      }
    nu_index_.assign(nx_ * ny_, -1);
    std::size_t n = 0;
    for (std::size_t x2 = 0; x2 < nx_; ++x2) {
      bool gauge = true;
      for (std::size_t y = 0; y < ny_; ++y) {
        if (in.joint2[x2 * ny_ + y] <= 0.0) continue;
        bool covered = false;
        for (const auto& r : rows_)
          if (r.x2 == x2 && std::find(r.ys.begin(), r.ys.end(), y) != r.ys.end()) covered = true;
        if (!covered) infeasible = true;
        if (gauge) {
          gauge = false;
          continue;
        }
        nu_index_[x2 * ny_ + y] = static_cast<int>(n++);
      }
    }
    n_nu_ = n;
    n_ = n + 1;
    lambda_hi_ = in.soft ? 1.0 : kLambdaMax;

    double c = 0.0;
    if (in.metric == MetricKind::MMI) {
      std::vector<double> qy(ny_, 0.0);
      for (std::size_t x2 = 0; x2 < nx_; ++x2)
        for (std::size_t y = 0; y < ny_; ++y) qy[y] += in.joint2[x2 * ny_ + y];
      for (double v : qy)
        if (v > 0.0) c -= v * std::log(v);
    }
    kappa0_ = c - in.gamma - (in.soft ? in.beta : 0.0);
    const0_ = in.soft ? in.beta : 0.0;

    double fmax = 0.0;
    for (std::size_t i = 0; i < nx_ * ny_; ++i)
      if (in.logw[i] > -kInf) fmax = std::max(fmax, -in.logw[i]);
    bound_ = fmax + 1.0;
    if (in.soft) {
      const double gmax = in.metric == MetricKind::ML ? 0.0 : std::log(static_cast<double>(nx_));
      bound_ += std::max(in.beta, gmax - in.gamma);
    }

    lm_.assign(in.logw.begin(), in.logw.end());
    theta_.assign(n_, 0.0);
    for (std::size_t x2 = 0; x2 < nx_; ++x2) {
      double ref = 0.0;
      bool first = true;
      for (std::size_t y = 0; y < ny_; ++y) {
        const double j = in.joint2[x2 * ny_ + y];
        if (j <= 0.0) continue;
        if (first) {
          ref = std::log(j);
          first = false;
        }
        const int k = nu_index_[x2 * ny_ + y];
        if (k >= 0) theta_[static_cast<std::size_t>(k)] = std::log(j) - ref;
      }
    }
  }

  bool infeasible = false;

  std::vector<double>& lm() { return lm_; }
  double lambda() const { return theta_.back(); }
  std::size_t iterations() const { return iterations_; }

  // Maximizes over (nu, lambda) at the current lm. Returns +inf when unbounded.
  double solve() {
    Eigen::VectorXd grad(n_);
    Eigen::MatrixXd hess(n_, n_);
    double v = eval(theta_, &grad, &hess);
    for (int it = 0; it < kNewtonIters; ++it) {
      ++iterations_;
      if (v > bound_) return kInf;
      const double lam = theta_.back();
      const double g_lam = grad(static_cast<Eigen::Index>(n_ - 1));
      const bool fix_lambda = (lam <= 0.0 && g_lam <= 0.0) || (lam >= lambda_hi_ && g_lam >= 0.0);
      auto newton = [&](std::size_t m) {
        Eigen::VectorXd step = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
        if (m == 0) return step;
        const auto mi = static_cast<Eigen::Index>(m);
        Eigen::MatrixXd a = -hess.topLeftCorner(mi, mi);
        const double ridge = 1e-12 * (1.0 + a.diagonal().cwiseAbs().maxCoeff());
        a.diagonal().array() += ridge;
        step.head(mi) = a.ldlt().solve(grad.head(mi));
        return step;
      };
      Eigen::VectorXd d = newton(fix_lambda ? n_ - 1 : n_);
      if (!fix_lambda) {
        // A step that leaves [0, lambda_hi] in the ascent direction makes the
        // bound active: pin lambda there and step in nu alone.
        const double target = lam + d(static_cast<Eigen::Index>(n_ - 1));
        const bool up = target > lambda_hi_ && g_lam > 0.0;
        const bool down = target < 0.0 && g_lam < 0.0;
        if (up || down) {
          std::vector<double> pinned = theta_;
          pinned.back() = up ? lambda_hi_ : 0.0;
          Eigen::VectorXd g2(static_cast<Eigen::Index>(n_));
          Eigen::MatrixXd h2(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
          const double v2 = eval(pinned, &g2, &h2);
          if (std::isfinite(v2) && v2 >= v) {
            theta_ = pinned;
            grad = g2;
            hess = h2;
            v = v2;
            continue;
          }
        }
      }
      const double decrement = grad.dot(d);
      if (!(decrement > 1e-15)) break;
      double t = 1.0;
      bool moved = false;
      std::vector<double> trial(n_);
      Eigen::VectorXd g2(n_);
      Eigen::MatrixXd h2(n_, n_);
      while (t > 1e-12) {
        for (std::size_t i = 0; i < n_; ++i) trial[i] = theta_[i] + t * d(static_cast<Eigen::Index>(i));
        trial.back() = std::clamp(trial.back(), 0.0, lambda_hi_);
        double dot = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
          dot += (trial[i] - theta_[i]) * grad(static_cast<Eigen::Index>(i));
        const double v2 = eval(trial, &g2, &h2);
        if (std::isfinite(v2) && v2 >= v + 1e-4 * dot) {
          theta_ = trial;
          grad = g2;
          hess = h2;
          moved = v2 > v || dot > 0.0;
          v = v2;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;
    }
    if (v > bound_) return kInf;
    return v;
  }

  // Row distributions at the current point, and Q_XY = sum_x' q(x,x') P_r.
  void rows_out(std::vector<double>& rows, std::vector<double>* qxy) const {
    rows.assign(nx_ * nx_ * ny_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
      for (std::size_t x2 = 0; x2 < nx_; ++x2)
        for (std::size_t y = 0; y < ny_; ++y)
          rows[(x * nx_ + x2) * ny_ + y] = std::exp(in_.logw[x * ny_ + y]);
    if (qxy) qxy->assign(nx_ * ny_, 0.0);
    std::vector<double> p;
    for (const auto& r : rows_) {
      row_probs(r, theta_, p);
      double* out = &rows[(r.x * nx_ + r.x2) * ny_];
      std::fill(out, out + ny_, 0.0);
      for (std::size_t k = 0; k < r.ys.size(); ++k) {
        out[r.ys[k]] = p[k];
        if (qxy) (*qxy)[r.x * ny_ + r.ys[k]] += r.q * p[k];
      }
    }
  }

 private:
  double exponent(const Row& r, std::size_t y, const std::vector<double>& th) const {
    const int k = nu_index_[r.x2 * ny_ + y];
    const double nu = k >= 0 ? th[static_cast<std::size_t>(k)] : 0.0;
    return in_.logw[r.x * ny_ + y] + nu - th.back() * lm_[r.x * ny_ + y];
  }

  double row_probs(const Row& r, const std::vector<double>& th, std::vector<double>& p) const {
    p.resize(r.ys.size());
    double mx = -kInf;
    for (std::size_t k = 0; k < r.ys.size(); ++k) {
      p[k] = exponent(r, r.ys[k], th);
      mx = std::max(mx, p[k]);
    }
    double s = 0.0;
    for (double& v : p) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : p) v /= s;
    return mx + std::log(s);
  }

  double eval(const std::vector<double>& th, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
    double v = const0_ + th.back() * kappa0_;
    grad->setZero();
    hess->setZero();
    for (std::size_t x2 = 0; x2 < nx_; ++x2)
      for (std::size_t y = 0; y < ny_; ++y) {
        const int k = nu_index_[x2 * ny_ + y];
        if (k < 0) continue;
        const double j = in_.joint2[x2 * ny_ + y];
        v += th[static_cast<std::size_t>(k)] * j;
        (*grad)(k) += j;
      }
    const auto li = static_cast<Eigen::Index>(n_ - 1);
    (*grad)(li) += kappa0_;
    std::vector<double> p;
    Eigen::VectorXd mean(n_);
    for (const auto& r : rows_) {
      const double lse = row_probs(r, th, p);
      v -= r.q * lse;
      mean.setZero();
      for (std::size_t k = 0; k < r.ys.size(); ++k) {
        const std::size_t y = r.ys[k];
        const int idx = nu_index_[r.x2 * ny_ + y];
        const double a_l = -lm_[r.x * ny_ + y];
        if (idx >= 0) {
          mean(idx) += p[k];
          (*hess)(idx, idx) -= r.q * p[k];
          (*hess)(idx, li) -= r.q * p[k] * a_l;
          (*hess)(li, idx) -= r.q * p[k] * a_l;
        }
        mean(li) += p[k] * a_l;
        (*hess)(li, li) -= r.q * p[k] * a_l * a_l;
      }
      *grad -= r.q * mean;
      *hess += r.q * mean * mean.transpose();
    }
    return v;
  }

  const PairDualInput& in_;
  std::size_t nx_, ny_;
  std::vector<Row> rows_;
  std::vector<int> nu_index_;
  std::size_t n_nu_ = 0, n_ = 0;
  double lambda_hi_ = 0.0;
  double kappa0_ = 0.0, const0_ = 0.0, bound_ = 0.0;
  std::vector<double> lm_;
  std::vector<double> theta_;
  std::size_t iterations_ = 0;
};

// log S(.|x) = eta - LSE(eta) over the channel support of each input.
struct Auxiliary {
  std::size_t nx, ny;
  std::vector<std::vector<std::size_t>> support;
  std::vector<std::pair<std::size_t, std::size_t>> vars;  // (x, y), first support entry fixed

  Auxiliary(std::size_t nx_, std::size_t ny_, std::span<const double> logw) : nx(nx_), ny(ny_) {
    support.resize(nx);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t y = 0; y < ny; ++y)
        if (logw[x * ny + y] > -kInf) support[x].push_back(y);
      for (std::size_t k = 1; k < support[x].size(); ++k) vars.emplace_back(x, support[x][k]);
    }
  }

  void fill(const Eigen::VectorXd& eta, std::vector<double>& lm) const {
    std::vector<double> e(nx * ny, 0.0);
    for (std::size_t i = 0; i < vars.size(); ++i)
      e[vars[i].first * ny + vars[i].second] = eta(static_cast<Eigen::Index>(i));
    for (std::size_t x = 0; x < nx; ++x) {
      std::vector<double> v;
      for (std::size_t y : support[x]) v.push_back(e[x * ny + y]);
      const double z = log_sum_exp(v);
      for (std::size_t y : support[x]) lm[x * ny + y] = e[x * ny + y] - z;
    }
  }

  // Envelope gradient lambda (Q_XY(x,y) - S(y|x) Q_X(x)).
  Eigen::VectorXd gradient(const std::vector<double>& lm, const std::vector<double>& qxy,
                           double lambda) const {
    Eigen::VectorXd g(static_cast<Eigen::Index>(vars.size()));
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const auto [x, y] = vars[i];
      double qx = 0.0;
      for (std::size_t z = 0; z < ny; ++z) qx += qxy[x * ny + z];
      g(static_cast<Eigen::Index>(i)) = lambda * (qxy[x * ny + y] - std::exp(lm[x * ny + y]) * qx);
    }
    return g;
  }

  Eigen::VectorXd from_rows(const std::vector<double>& qxy) const {
    Eigen::VectorXd eta(static_cast<Eigen::Index>(vars.size()));
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const auto [x, y] = vars[i];
      const std::size_t y0 = support[x].front();
      const double a = std::max(qxy[x * ny + y], 1e-300), b = std::max(qxy[x * ny + y0], 1e-300);
      eta(static_cast<Eigen::Index>(i)) = std::log(a) - std::log(b);
    }
    return eta;
  }
};

}  // namespace

PairDualResult solve_pair_dual(const PairDualInput& in) {
  PairDualResult res;
  Dual dual(in);
  if (dual.infeasible) {
    res.value = kInf;
    dual.rows_out(res.rows, nullptr);
    return res;
  }
  if (in.metric == MetricKind::ML) {
    res.value = dual.solve();
    res.lambda = dual.lambda();
    res.iterations = dual.iterations();
    dual.rows_out(res.rows, nullptr);
    return res;
  }

  // MMI: maximize the dual value over the auxiliary S by BFGS on its logits,
  // seeded with the Q_{Y|X} that J' induces when Y depends on X' alone.
  const Auxiliary aux(in.nx, in.ny, in.logw);
  std::vector<double> qxy(in.nx * in.ny, 0.0);
  for (std::size_t x = 0; x < in.nx; ++x)
    for (std::size_t x2 = 0; x2 < in.nx; ++x2) {
      const double q = in.q_xx[x * in.nx + x2];
      double row = 0.0;
      for (std::size_t y = 0; y < in.ny; ++y) row += in.joint2[x2 * in.ny + y];
      if (q <= 0.0 || row <= 0.0) continue;
      for (std::size_t y = 0; y < in.ny; ++y)
        if (in.logw[x * in.ny + y] > -kInf) qxy[x * in.ny + y] += q * in.joint2[x2 * in.ny + y] / row;
    }
  Eigen::VectorXd eta = aux.from_rows(qxy);
  auto value_at = [&](const Eigen::VectorXd& e) {
    aux.fill(e, dual.lm());
    return dual.solve();
  };
  double v = value_at(eta);
  if (v == kInf) {
    res.value = kInf;
    dual.rows_out(res.rows, nullptr);
    return res;
  }
  dual.rows_out(res.rows, &qxy);
  // Fixed-point phase S <- Q*_{Y|X}. It also leaves lambda = 0, where the
  // envelope gradient in S vanishes.
  for (int it = 0; it < kFixedPointIters; ++it) {
    const Eigen::VectorXd eta2 = aux.from_rows(qxy);
    const double v2 = value_at(eta2);
    if (!(v2 != kInf && v2 > v + 1e-11 * (1.0 + std::abs(v)))) {
      value_at(eta);
      dual.rows_out(res.rows, &qxy);
      break;
    }
    eta = eta2;
    v = v2;
    dual.rows_out(res.rows, &qxy);
  }
  Eigen::VectorXd g = aux.gradient(dual.lm(), qxy, dual.lambda());
  const auto m = static_cast<Eigen::Index>(aux.vars.size());
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(m, m);
  for (int it = 0; it < kOuterIters && m > 0; ++it) {
    if (g.cwiseAbs().maxCoeff() < 1e-9) break;
    Eigen::VectorXd d = hinv * g;
    if (g.dot(d) <= 0.0) {
      hinv.setIdentity();
      d = g;
    }
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd eta2;
    double v2 = v;
    while (t > 1e-14) {
      eta2 = eta + t * d;
      v2 = value_at(eta2);
      if (v2 != kInf && v2 >= v + 1e-4 * t * g.dot(d)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      value_at(eta);
      break;
    }
    dual.rows_out(res.rows, &qxy);
    Eigen::VectorXd g2 = aux.gradient(dual.lm(), qxy, dual.lambda());
    const Eigen::VectorXd s = eta2 - eta;
    const Eigen::VectorXd yv = g - g2;  // gradient change of the minimized -V
    const double sy = s.dot(yv);
    if (sy > 1e-16) {
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
      const double r = 1.0 / sy;
      hinv = (I - r * s * yv.transpose()) * hinv * (I - r * yv * s.transpose()) + r * s * s.transpose();
    }
    const double gain = v2 - v;
    eta = eta2;
    g = g2;
    v = v2;
    if (gain < 1e-12 * (1.0 + std::abs(v))) break;
  }
  res.value = v;
  res.lambda = dual.lambda();
  res.iterations = dual.iterations();
  dual.rows_out(res.rows, nullptr);
  return res;
}

}  // namespace explab::detail
