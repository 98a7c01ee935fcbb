#include "explab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "explab/search.hpp"

namespace explab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Uniform integer in [0, bound) by rejection, identical on every platform.
std::uint64_t bounded(std::mt19937_64& g, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = g();
    if (x >= threshold) return x % bound;
  }
}

std::uint64_t output_count(std::size_t ny, std::size_t n, std::uint64_t cap) {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (total > cap / ny) throw Error("output enumeration exceeds the cap of " + std::to_string(cap));
    total *= ny;
  }
  if (total > cap) throw Error("output enumeration exceeds the cap of " + std::to_string(cap));
  return total;
}

// Walks Y^n in reflected Gray order (one position changes per step), keeping
// per-codeword joint counts N_m(x, y) and the output counts N(y).
class Enumerator {
 public:
  Enumerator(const Codebook& cb, const Channel& ch, std::uint64_t cap)
      : cb_(cb), nx_(ch.inputs()), ny_(ch.outputs()), n_(cb.n), m_(cb.size()),
        lw_(ch.log_matrix().begin(), ch.log_matrix().end()) {
    if (cb.inputs != nx_) throw Error("codebook alphabet does not match the channel");
    if (m_ == 0) throw Error("codebook is empty");
    total_ = output_count(ny_, n_, cap);
    klogk_.resize(n_ + 1);
    for (std::size_t k = 0; k <= n_; ++k)
      klogk_[k] = k == 0 ? 0.0 : static_cast<double>(k) * std::log(static_cast<double>(k));
    counts_.assign(m_ * nx_ * ny_, 0);
    ycount_.assign(ny_, 0);
    y_.assign(n_, 0);
    dir_.assign(n_, 1);
    ycount_[0] = static_cast<int>(n_);
    for (std::size_t m = 0; m < m_; ++m)
      for (std::size_t i = 0; i < n_; ++i) ++counts_[(m * nx_ + sym(m, i)) * ny_];
    // n H(X) of the codeword composition, the same for every message.
    std::vector<int> xc(nx_, 0);
    for (std::size_t i = 0; i < n_; ++i) ++xc[sym(0, i)];
    nhx_ = klogk_[n_];
    for (int c : xc) nhx_ -= klogk_[static_cast<std::size_t>(c)];
    pow_.assign(n_, 1);
    for (std::size_t i = n_; i-- > 1;) pow_[i - 1] = pow_[i] * ny_;
  }

  std::uint64_t total() const { return total_; }
  std::size_t messages() const { return m_; }
  std::size_t n() const { return n_; }

  // visit(index) for every output; index is the base-|Y| value of y.
  template <class F>
  void run(F&& visit) {
    std::uint64_t index = 0;
    visit(index);
    for (std::uint64_t step = 1; step < total_; ++step) {
      for (std::size_t i = n_; i-- > 0;) {
        const int nd = y_[i] + dir_[i];
        if (nd >= 0 && nd < static_cast<int>(ny_)) {
          change(i, nd);
          index = index + static_cast<std::uint64_t>(nd) * pow_[i] -
                  static_cast<std::uint64_t>(nd - dir_[i]) * pow_[i];
          break;
        }
        dir_[i] = -dir_[i];
      }
      visit(index);
    }
  }

  // log W^n(y | x_m).
  double log_likelihood(std::size_t m) const {
    double s = 0.0;
    const int* c = &counts_[m * nx_ * ny_];
    for (std::size_t k = 0; k < nx_ * ny_; ++k) {
      if (c[k] == 0) continue;
      if (lw_[k] == -kInf) return -kInf;
      s += c[k] * lw_[k];
    }
    return s;
  }

  // n H(X_m | Y) of the joint type.
  double n_cond_entropy(std::size_t m) const {
    double s = 0.0;
    for (std::size_t y = 0; y < ny_; ++y) s += klogk_[static_cast<std::size_t>(ycount_[y])];
    const int* c = &counts_[m * nx_ * ny_];
    for (std::size_t k = 0; k < nx_ * ny_; ++k) s -= klogk_[static_cast<std::size_t>(c[k])];
    return s;
  }

  // n I(X_m; Y) of the joint type.
  double n_mutual_information(std::size_t m) const { return nhx_ - n_cond_entropy(m); }

  double n_metric(MetricKind kind, std::size_t m) const {
    return kind == MetricKind::ML ? log_likelihood(m) : n_mutual_information(m);
  }

 private:
  std::size_t sym(std::size_t m, std::size_t i) const {
    return static_cast<std::size_t>(cb_.codewords[m][i]);
  }

  void change(std::size_t i, int nd) {
    const auto old = static_cast<std::size_t>(y_[i]);
    const auto now = static_cast<std::size_t>(nd);
    --ycount_[old];
    ++ycount_[now];
    for (std::size_t m = 0; m < m_; ++m) {
      int* c = &counts_[(m * nx_ + sym(m, i)) * ny_];
      --c[old];
      ++c[now];
    }
    y_[i] = nd;
  }

  const Codebook& cb_;
  std::size_t nx_, ny_, n_, m_;
  std::vector<double> lw_;
  std::uint64_t total_ = 0;
  std::vector<double> klogk_;
  std::vector<int> counts_, ycount_, y_, dir_;
  std::vector<std::uint64_t> pow_;
  double nhx_ = 0.0;
};

std::size_t argmax_lowest(const std::vector<double>& score) {
  double best = -kInf;
  for (double s : score) best = std::max(best, s);
  for (std::size_t m = 0; m < score.size(); ++m)
    if (score[m] >= best - kTieTolerance) return m;
  return 0;
}

void fill_scores(const Enumerator& e, DecoderKind kind, std::vector<double>& score) {
  for (std::size_t m = 0; m < e.messages(); ++m) {
    switch (kind) {
      case DecoderKind::ML: score[m] = e.log_likelihood(m); break;
      case DecoderKind::MMI: score[m] = e.n_mutual_information(m); break;
      case DecoderKind::MinCondEntropy: score[m] = -e.n_cond_entropy(m); break;
      case DecoderKind::Gld: throw Error("the GLD is not a deterministic decoder");
    }
  }
}

ErrorProfile finish(std::vector<long double> err) {
  ErrorProfile p;
  p.per_message.reserve(err.size());
  long double sum = 0.0L;
  for (long double v : err) {
    const double d = std::clamp(static_cast<double>(v), 0.0, 1.0);
    p.per_message.push_back(d);
    sum += d;
    p.max = std::max(p.max, d);
  }
  p.average = static_cast<double>(sum / static_cast<long double>(err.size()));
  return p;
}

}  // namespace

double Codebook::rate() const {
  if (n == 0 || codewords.empty()) return 0.0;
  return std::log(static_cast<double>(codewords.size())) / static_cast<double>(n);
}

void Codebook::validate(const std::vector<int>& counts) const {
  for (std::size_t m = 0; m < codewords.size(); ++m) {
    const auto& w = codewords[m];
    if (w.size() != n) throw Error("codeword " + std::to_string(m) + " has the wrong length");
    std::vector<int> c(inputs, 0);
    for (int s : w) {
      if (s < 0 || static_cast<std::size_t>(s) >= inputs)
        throw Error("codeword " + std::to_string(m) + " has a symbol outside the alphabet");
      ++c[static_cast<std::size_t>(s)];
    }
    if (c != counts) throw Error("codeword " + std::to_string(m) + " has the wrong composition");
  }
}

void GldConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error("GLD beta must be finite and nonnegative");
}

std::string DecoderSpec::tag() const {
  switch (kind) {
    case DecoderKind::ML: return "ml";
    case DecoderKind::MMI: return "mmi";
    case DecoderKind::MinCondEntropy: return "mce";
    case DecoderKind::Gld: {
      std::ostringstream os;
      os << "gld:" << gld.metric.name() << ":" << gld.beta;
      return os.str();
    }
  }
  return "?";
}

DecoderSpec parse_decoder(const std::string& name) {
  DecoderSpec d;
  if (name == "ml") return d;
  if (name == "mmi") {
    d.kind = DecoderKind::MMI;
    return d;
  }
  if (name == "mce") {
    d.kind = DecoderKind::MinCondEntropy;
    return d;
  }
  // gld[:metric[:beta]]
  if (name.rfind("gld", 0) == 0) {
    d.kind = DecoderKind::Gld;
    std::string rest = name.substr(3);
    if (!rest.empty()) {
      if (rest.front() != ':') throw Error("unknown decoder '" + name + "'");
      rest.erase(0, 1);
      const auto colon = rest.find(':');
      d.gld.metric = parse_metric(rest.substr(0, colon));
      if (colon != std::string::npos) {
        try {
          std::size_t used = 0;
          const std::string b = rest.substr(colon + 1);
          d.gld.beta = std::stod(b, &used);
          if (used != b.size()) throw Error("bad beta");
        } catch (const std::exception&) {
          throw Error("bad GLD beta in '" + name + "'");
        }
      }
    }
    d.gld.validate();
    return d;
  }
  throw Error("unknown decoder '" + name + "' (expected ml, mmi, mce or gld[:metric[:beta]])");
}

std::vector<int> type_counts(std::size_t n, const Dist& q_x) {
  if (n == 0) throw Error("blocklength must be positive");
  std::vector<int> counts(q_x.size());
  int total = 0;
  for (std::size_t x = 0; x < q_x.size(); ++x) {
    const double v = q_x[x] * static_cast<double>(n);
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9)
      throw Error("composition is not realizable at blocklength " + std::to_string(n));
    counts[x] = static_cast<int>(r);
    total += counts[x];
  }
  if (total != static_cast<int>(n)) throw Error("composition does not sum to the blocklength");
  return counts;
}

Codebook sample_codebook(std::size_t n, std::size_t M, const Dist& q_x, std::uint64_t seed,
                         std::uint64_t stream) {
  if (M == 0) throw Error("codebook size must be positive");
  const auto counts = type_counts(n, q_x);
  std::vector<int> base;
  base.reserve(n);
  for (std::size_t x = 0; x < counts.size(); ++x) base.insert(base.end(), static_cast<std::size_t>(counts[x]), static_cast<int>(x));
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 g(seq);
  Codebook cb;
  cb.n = n;
  cb.inputs = q_x.size();
  cb.codewords.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    std::vector<int> w = base;
    for (std::size_t i = n; i-- > 1;) std::swap(w[i], w[bounded(g, i + 1)]);
    cb.codewords.push_back(std::move(w));
  }
  return cb;
}

ErrorProfile exact_error_profile(const Codebook& cb, const Channel& ch, DecoderKind decoder,
                                 std::uint64_t cap) {
  if (decoder == DecoderKind::Gld) return exact_error_profile_gld(cb, ch, GldConfig{}, cap);
  Enumerator e(cb, ch, cap);
  const std::size_t M = e.messages();
  std::vector<long double> err(M, 0.0L);
  std::vector<double> score(M);
  e.run([&](std::uint64_t) {
    fill_scores(e, decoder, score);
    const std::size_t d = argmax_lowest(score);
    for (std::size_t m = 0; m < M; ++m) {
      if (m == d) continue;
      const double ll = e.log_likelihood(m);
      if (ll > -kInf) err[m] += std::exp(static_cast<long double>(ll));
    }
  });
  return finish(std::move(err));
}

ErrorProfile exact_error_profile_gld(const Codebook& cb, const Channel& ch, const GldConfig& cfg,
                                     std::uint64_t cap) {
  cfg.validate();
  Enumerator e(cb, ch, cap);
  const std::size_t M = e.messages();
  std::vector<long double> err(M, 0.0L);
  std::vector<long double> z_sum(M, 0.0L), z_sq(M, 0.0L);
  std::vector<bool> z_neg_inf(M, false);
  std::vector<double> s(M);
  e.run([&](std::uint64_t) {
    double top = -kInf;
    for (std::size_t m = 0; m < M; ++m) {
      const double g = e.n_metric(cfg.metric.kind, m);
      s[m] = cfg.beta == 0.0 ? 0.0 : cfg.beta * g;
      top = std::max(top, s[m]);
    }
    long double total = 0.0L;
    if (top > -kInf)
      for (std::size_t m = 0; m < M; ++m) total += std::exp(static_cast<long double>(s[m] - top));
    for (std::size_t m = 0; m < M; ++m) {
      const double ll = e.log_likelihood(m);
      if (ll == -kInf) continue;
      const long double w = std::exp(static_cast<long double>(ll));
      const long double post =
          top == -kInf ? 1.0L / static_cast<long double>(M)
                       : std::exp(static_cast<long double>(s[m] - top)) / total;
      err[m] += w * (1.0L - post);
      if (M < 2) continue;
      // log Z_m = log(total e^top - e^{s_m}).
      const long double rest = top == -kInf ? 0.0L : total - std::exp(static_cast<long double>(s[m] - top));
      if (rest <= 0.0L) {
        z_neg_inf[m] = true;
        continue;
      }
      const long double lz = static_cast<long double>(top) + std::log(rest);
      z_sum[m] += w * lz;
      z_sq[m] += w * lz * lz;
    }
  });
  ErrorProfile p = finish(std::move(err));
  if (M >= 2) {
    p.log_z_mean.resize(M);
    p.log_z_sd.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
      if (z_neg_inf[m]) {
        p.log_z_mean[m] = -kInf;
        p.log_z_sd[m] = 0.0;
        continue;
      }
      const long double mean = z_sum[m];
      p.log_z_mean[m] = static_cast<double>(mean);
      p.log_z_sd[m] = static_cast<double>(std::sqrt(std::max(0.0L, z_sq[m] - mean * mean)));
    }
  }
  return p;
}

ErrorProfile error_profile(const Codebook& cb, const Channel& ch, const DecoderSpec& decoder,
                           std::uint64_t cap) {
  if (decoder.kind == DecoderKind::Gld) return exact_error_profile_gld(cb, ch, decoder.gld, cap);
  return exact_error_profile(cb, ch, decoder.kind, cap);
}

std::vector<int> decisions(const Codebook& cb, const Channel& ch, DecoderKind decoder,
                           std::uint64_t cap) {
  Enumerator e(cb, ch, cap);
  std::vector<int> out(e.total());
  std::vector<double> score(e.messages());
  e.run([&](std::uint64_t index) {
    fill_scores(e, decoder, score);
    out[index] = static_cast<int>(argmax_lowest(score));
  });
  return out;
}

ErrorProfile tie_split_ml_profile(const Codebook& cb, const Channel& ch, std::uint64_t cap) {
  Enumerator e(cb, ch, cap);
  const std::size_t M = e.messages();
  std::vector<long double> err(M, 0.0L);
  std::vector<double> score(M);
  e.run([&](std::uint64_t) {
    fill_scores(e, DecoderKind::ML, score);
    double best = -kInf;
    for (double v : score) best = std::max(best, v);
    std::size_t ties = 0;
    for (double v : score) ties += v >= best - kTieTolerance ? 1 : 0;
    for (std::size_t m = 0; m < M; ++m) {
      if (score[m] == -kInf) continue;
      const long double w = std::exp(static_cast<long double>(score[m]));
      const bool won = score[m] >= best - kTieTolerance;
      err[m] += w * (won ? 1.0L - 1.0L / static_cast<long double>(ties) : 1.0L);
    }
  });
  return finish(std::move(err));
}

TrialSummary empirical_trc(std::size_t n, std::size_t M, const Dist& q_x, const Channel& ch,
                           const DecoderSpec& decoder, std::size_t samples, std::uint64_t seed,
                           unsigned threads, std::uint64_t cap) {
  if (samples == 0) throw Error("at least one sample is required");
  if (q_x.size() != ch.inputs()) throw Error("composition does not match the channel");
  type_counts(n, q_x);
  output_count(ch.outputs(), n, cap);
  std::vector<double> pe(samples);
  search::parallel_for(samples, threads, [&](std::size_t i) {
    const Codebook cb = sample_codebook(n, M, q_x, seed, i);
    pe[i] = error_profile(cb, ch, decoder, cap).average;
  });
  TrialSummary t;
  t.n = n;
  t.M = M;
  t.rate = std::log(static_cast<double>(M)) / static_cast<double>(n);
  t.samples = samples;
  t.decoder = decoder.tag();
  t.seed = seed;
  t.composition = q_x;
  std::vector<double> logs;
  double pe_sum = 0.0;
  for (double p : pe) {
    pe_sum += p;
    if (p > 0.0)
      logs.push_back(std::log(p));
    else
      ++t.zero_error_samples;
  }
  t.mean_pe = pe_sum / static_cast<double>(samples);
  if (logs.empty()) {
    t.all_zero = true;
    t.mean_log_pe = -kInf;
    t.empirical_exponent = kInf;
    return t;
  }
  const double k = static_cast<double>(logs.size());
  const double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / k;
  double ss = 0.0;
  for (double v : logs) ss += (v - mean) * (v - mean);
  t.mean_log_pe = mean;
  t.stderr_log_pe = logs.size() > 1 ? std::sqrt(ss / (k - 1.0) / k) : 0.0;
  t.empirical_exponent = -mean / static_cast<double>(n);
  return t;
}

std::vector<std::size_t> best_half(const ErrorProfile& profile) {
  const std::size_t M = profile.per_message.size();
  std::vector<std::size_t> order(M);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return profile.per_message[a] < profile.per_message[b];
  });
  order.resize((M + 1) / 2);
  std::sort(order.begin(), order.end());
  return order;
}

Codebook expurgate_worst_half(const Codebook& cb, const ErrorProfile& profile) {
  if (profile.per_message.size() != cb.size())
    throw Error("error profile does not match the codebook");
  if (cb.size() <= 1) return cb;
  Codebook out;
  out.n = cb.n;
  out.inputs = cb.inputs;
  for (std::size_t m : best_half(profile)) out.codewords.push_back(cb.codewords[m]);
  return out;
}

}  // namespace explab
