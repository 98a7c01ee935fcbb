#pragma once

// Exact small-blocklength simulation of fixed-composition random codes. Error
// probabilities are computed by enumerating every output sequence, never by
// sampling outputs.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "explab/exponents.hpp"
#include "explab/prob.hpp"

namespace explab {

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 20;
// Decoder scores (n times the metric) closer than this are ties, resolved
// toward the lowest message index.
inline constexpr double kTieTolerance = 1e-9;

struct Codebook {
  std::size_t n = 0;
  std::size_t inputs = 0;  // |X|
  std::vector<std::vector<int>> codewords;

  std::size_t size() const { return codewords.size(); }
  double rate() const;  // log(M)/n nats
  // Throws unless every codeword has the composition `counts` (symbol counts).
  void validate(const std::vector<int>& counts) const;
  bool operator==(const Codebook&) const = default;
};

enum class DecoderKind { ML, MMI, MinCondEntropy, Gld };

// Generalized likelihood decoder: picks m with probability proportional to
// exp(beta * n * g(P_{x_m y})).
struct GldConfig {
  DecodingMetric metric = DecodingMetric::ml();
  double beta = 1.0;

  void validate() const;
};

struct DecoderSpec {
  DecoderKind kind = DecoderKind::ML;
  GldConfig gld;

  std::string tag() const;
};

DecoderSpec parse_decoder(const std::string& name);

struct ErrorProfile {
  std::vector<double> per_message;
  double average = 0.0;
  double max = 0.0;
  // log Z_m(Y), Z_m(y) = sum over m' != m of exp(n g(P_{x_m' y})), averaged over
  // Y ~ W(.|x_m), with its standard deviation. Empty for deterministic decoders
  // and for M = 1.
  std::vector<double> log_z_mean;
  std::vector<double> log_z_sd;
};

// Counts n Q_X(x); throws if n Q_X is not integral within 1e-9.
std::vector<int> type_counts(std::size_t n, const Dist& q_x);

// M independent uniform draws from the type class of q_x by Fisher-Yates
// shuffles; stream selects an independent sequence for the same seed.
Codebook sample_codebook(std::size_t n, std::size_t M, const Dist& q_x, std::uint64_t seed,
                         std::uint64_t stream = 0);

ErrorProfile exact_error_profile(const Codebook& cb, const Channel& ch, DecoderKind decoder,
                                 std::uint64_t cap = kDefaultEnumerationCap);
ErrorProfile exact_error_profile_gld(const Codebook& cb, const Channel& ch, const GldConfig& cfg,
                                     std::uint64_t cap = kDefaultEnumerationCap);
ErrorProfile error_profile(const Codebook& cb, const Channel& ch, const DecoderSpec& decoder,
                           std::uint64_t cap = kDefaultEnumerationCap);

// Decision of a deterministic decoder for every output sequence, indexed by
// the base-|Y| value of y (y_0 most significant).
std::vector<int> decisions(const Codebook& cb, const Channel& ch, DecoderKind decoder,
                           std::uint64_t cap = kDefaultEnumerationCap);

// ML profile with each output's ties shared evenly among the maximizing
// messages: the beta -> infinity limit of the ML-metric GLD.
ErrorProfile tie_split_ml_profile(const Codebook& cb, const Channel& ch,
                                  std::uint64_t cap = kDefaultEnumerationCap);

struct TrialSummary {
  std::size_t n = 0, M = 0;
  double rate = 0.0;
  std::size_t samples = 0;
  std::size_t zero_error_samples = 0;  // excluded from the log-mean
  bool all_zero = false;
  double mean_log_pe = 0.0;
  double stderr_log_pe = 0.0;
  double empirical_exponent = 0.0;
  double mean_pe = 0.0;
  std::string decoder;
  std::uint64_t seed = 0;
  Dist composition;
};

// Sample i uses stream i of the seed, so results do not depend on threads.
TrialSummary empirical_trc(std::size_t n, std::size_t M, const Dist& q_x, const Channel& ch,
                           const DecoderSpec& decoder, std::size_t samples, std::uint64_t seed,
                           unsigned threads = 1, std::uint64_t cap = kDefaultEnumerationCap);

// Indices of the ceil(M/2) messages with the smallest error (ties by index),
// in increasing index order.
std::vector<std::size_t> best_half(const ErrorProfile& profile);
Codebook expurgate_worst_half(const Codebook& cb, const ErrorProfile& profile);

}  // namespace explab
