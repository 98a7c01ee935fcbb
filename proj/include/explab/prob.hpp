#pragma once

// Distributions on finite alphabets, information measures in nats, and the
// lattice enumerations (simplex points, couplings) the optimizers search over.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace explab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kMeasureTol = 1e-10;

struct Alphabet {
  std::size_t size = 1;

  explicit Alphabet(std::size_t n) : size(n) {
    if (n == 0) throw Error("alphabet size must be positive");
  }
};

class Dist {
 public:
  Dist() = default;
  explicit Dist(std::vector<double> probs);

  static Dist uniform(std::size_t n);
  static Dist point_mass(std::size_t n, std::size_t at);
  // Clips tiny negatives and rescales; for search outputs that drifted by rounding.
  static Dist normalized(std::vector<double> weights);

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> probs() const { return p_; }
  const std::vector<double>& vec() const { return p_; }

  bool operator==(const Dist&) const = default;

 private:
  std::vector<double> p_;
};

// One distribution over the output alphabet per conditioning symbol (or pair,
// flattened row-major as x * |X'| + x').
class CondDist {
 public:
  CondDist() = default;
  explicit CondDist(std::vector<Dist> rows);

  std::size_t num_rows() const { return rows_.size(); }
  std::size_t num_outputs() const { return rows_.empty() ? 0 : rows_.front().size(); }
  const Dist& operator[](std::size_t r) const { return rows_[r]; }
  double at(std::size_t r, std::size_t y) const { return rows_[r][y]; }
  const std::vector<Dist>& rows() const { return rows_; }

  bool operator==(const CondDist&) const = default;

 private:
  std::vector<Dist> rows_;
};

// Joint distribution over (row variable, column variable), stored row-major.
class Joint2 {
 public:
  Joint2() = default;
  Joint2(std::size_t rows, std::size_t cols, std::vector<double> probs);

  static Joint2 product(const Dist& row, const Dist& col);
  static Joint2 from_conditional(const Dist& row, const CondDist& col_given_row);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t r, std::size_t c) const { return p_[r * cols_ + c]; }
  std::span<const double> probs() const { return p_; }
  const std::vector<double>& vec() const { return p_; }

  Dist row_marginal() const;
  Dist col_marginal() const;
  // Q(col | row); rows with zero mass get a uniform conditional.
  CondDist col_given_row() const;
  Joint2 transpose() const;

  bool operator==(const Joint2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> p_;
};

// Q_{XX'Y}, indexed (x, x', y).
class Joint3 {
 public:
  Joint3() = default;
  Joint3(std::size_t nx, std::size_t nx2, std::size_t ny, std::vector<double> probs);

  static Joint3 from_coupling(const Joint2& q_xx, const CondDist& y_given_pair);

  std::size_t nx() const { return nx_; }
  std::size_t nx2() const { return nx2_; }
  std::size_t ny() const { return ny_; }
  double at(std::size_t x, std::size_t x2, std::size_t y) const {
    return p_[(x * nx2_ + x2) * ny_ + y];
  }
  std::span<const double> probs() const { return p_; }

  Joint2 xy() const;
  Joint2 x2y() const;
  Joint2 xx2() const;

 private:
  std::size_t nx_ = 0, nx2_ = 0, ny_ = 0;
  std::vector<double> p_;
};

// A DMC W(y|x).
class Channel {
 public:
  Channel() = default;
  explicit Channel(CondDist w, std::string name = {});

  static Channel bsc(double crossover);
  static Channel identity(std::size_t n);

  std::size_t inputs() const { return w_.num_rows(); }
  std::size_t outputs() const { return w_.num_outputs(); }
  double operator()(std::size_t x, std::size_t y) const { return w_.at(x, y); }
  // -inf outside the support.
  double log_w(std::size_t x, std::size_t y) const { return log_w_[x * outputs() + y]; }
  bool support(std::size_t x, std::size_t y) const { return support_[x * outputs() + y] != 0; }
  const CondDist& matrix() const { return w_; }
  std::span<const double> log_matrix() const { return log_w_; }
  const std::string& name() const { return name_; }

  Channel relabel_inputs(std::span<const std::size_t> perm) const;
  Channel relabel_outputs(std::span<const std::size_t> perm) const;

 private:
  CondDist w_;
  std::vector<double> log_w_;
  std::vector<std::uint8_t> support_;
  std::string name_;
};

// Information measures in nats with 0 log 0 = 0.
double entropy(const Dist& d);
double entropy(std::span<const double> p);
// H(row variable | column variable).
double conditional_entropy(const Joint2& j);
double mutual_information(const Joint2& j);
double mutual_information(std::span<const double> joint, std::size_t rows, std::size_t cols);
// +infinity when p puts mass where q has none.
double kl_divergence(const Dist& p, const Dist& q);

Joint2 empirical_joint(std::span<const int> x_seq, std::span<const int> y_seq,
                       std::size_t nx, std::size_t ny);
Joint2 empirical_joint(std::span<const int> x_seq, std::span<const int> y_seq);

inline constexpr std::size_t kDefaultGridCap = 5'000'000;

// Number of points of the 1/k lattice on the (dim-1)-simplex, C(k+dim-1, dim-1).
std::uint64_t simplex_grid_count(std::size_t dim, std::size_t k);
// Integer compositions of k into dim parts, lexicographic ascending.
std::vector<std::vector<int>> compositions(std::size_t dim, std::size_t k,
                                           std::size_t cap = kDefaultGridCap);
std::vector<Dist> simplex_grid(std::size_t dim, std::size_t k,
                               std::size_t cap = kDefaultGridCap);

bool is_grid_aligned(const Dist& q, std::size_t k);
// Nearest composition with entries in (1/k)Z, by largest remainder.
Dist align_to_grid(const Dist& q, std::size_t k);

// Couplings Q_{XX'} = Q_X(x) Q_{X'|X}(x'|x) with every row of Q_{X'|X} on the
// 1/k simplex lattice and Q_{X'} = Q_X exactly. q must be 1/k-aligned.
std::vector<Joint2> coupling_grid(const Dist& q, std::size_t k,
                                  std::size_t cap = kDefaultGridCap);

}  // namespace explab
