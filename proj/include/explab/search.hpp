#pragma once

// Derivative-free search shared by every optimization in the toolkit:
// an exhaustive lattice pass picks seeds, then a pattern search polls moves
// along directions that preserve the domain's equality constraints
// (probability transfers inside a simplex row, 2x2 cycles inside a
// transportation polytope) until the step has shrunk refine_iters times.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace explab::search {

using Point = std::vector<double>;

// Sparse move; coordinates outside the listed ones are untouched.
using Direction = std::vector<std::pair<std::size_t, double>>;

struct Eval {
  double value = 0.0;
  double violation = 0.0;  // 0 when all inequality constraints hold
};

// The objective receives the slack currently admitted and a cutoff: a point
// whose value cannot drop below the cutoff will not be accepted, so callers may
// return any Eval with value >= cutoff for it without finishing the work.
using Objective = std::function<Eval(std::span<const double> x, double slack, double cutoff)>;

struct Settings {
  double initial_step = 0.125;
  int refine_iters = 20;
  double shrink = 0.5;
  // Constraint violation admitted at the initial step; decays with
  // (step/initial)^slack_power.
  double slack = 1e-3;
  double slack_power = 2.0;
  int restarts = 3;
  int random_directions = 4;
  int max_moves_per_level = 64;
  std::uint64_t rng_seed = 0x5eed;
  // Nonnegativity applies to coordinates [0, nonneg_end); the rest are free.
  std::size_t nonneg_end = static_cast<std::size_t>(-1);
  // Optional constraint margin h (feasible iff h >= 0). When set, a poll that
  // improves the value but breaks the constraint is pulled back onto the
  // boundary along the finite-difference ascent direction of h, built from the
  // first restore_dirs search directions.
  std::function<double(std::span<const double>)> constraint;
  std::size_t restore_dirs = static_cast<std::size_t>(-1);
  // Workers for the lattice pass; the objective must then be thread-safe.
  unsigned threads = 1;
};

struct Outcome {
  Point point;
  Eval eval;
  bool feasible = false;
  double final_slack = 0.0;
  std::size_t grid_points = 0;
  std::size_t grid_feasible = 0;
  std::size_t evaluations = 0;
  std::vector<double> trace;  // incumbent value after each refinement level
};

// Feasibility-first ordering: feasible beats infeasible, then by value, then by violation.
bool better(const Eval& a, const Eval& b, double slack);

Outcome minimize(std::span<const Point> grid, std::span<const Direction> directions,
                 const Objective& f, const Settings& settings);

// Lattice over a product of `rows` simplices of dimension `dim`, flattened row-major.
// The resolution is lowered until the product fits under `cap`; the k used is returned.
std::vector<Point> product_simplex_grid(std::size_t rows, std::size_t dim, std::size_t k,
                                        std::size_t cap, std::size_t* k_used = nullptr);
// Mass transfers within each row, plus pairwise combinations across rows.
std::vector<Direction> product_simplex_directions(std::size_t rows, std::size_t dim,
                                                  std::size_t offset = 0);

// Matrices with the given row and column sums; free entries of the leading
// (r-1)x(c-1) block on `levels` equally spaced values each.
std::vector<Point> transport_grid(std::span<const double> row_sums,
                                  std::span<const double> col_sums, std::size_t levels,
                                  std::size_t cap);
// Elementary 2x2 cycles (+ at (i,j),(k,l); - at (i,l),(k,j)).
std::vector<Direction> transport_directions(std::size_t rows, std::size_t cols);

struct ScalarMax {
  double arg = 0.0;
  double value = 0.0;
  bool unbounded = false;
  std::size_t evaluations = 0;
};

// Supremum over t >= 0 of a concave function: probe {0} and a log-spaced grid
// on [lo, hi], double hi (at most max_doublings times) while the best probe sits
// on the upper end, then golden-section inside the bracketing probes. Growth that
// persists past the last doubling is reported as unbounded.
ScalarMax maximize_ray(const std::function<double(double)>& f, double lo = 1e-3, double hi = 8.0,
                       int grid = 24, int max_doublings = 3, double tol = 1e-9);

// Golden-section maximization of a unimodal function on [a, b].
std::pair<double, double> golden_max(const std::function<double(double)>& f, double a, double b,
                                     double tol = 1e-10);

// Runs body(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

// EXPLAB_THREADS when set, else 1.
unsigned default_threads();

}  // namespace explab::search
