#pragma once

// Shared numerical primitives: small SPD matrices, the entropy rate G,
// Gauss-Hermite rules, uniform grids, log-mean-exp and reproducible RNG streams.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ehedge {

/// Relative eigenvalue floor below which a matrix is not treated as strictly
/// positive definite.
inline constexpr double kTolPd = 1e-12;

class SpdMatrix {
 public:
  SpdMatrix() = default;

  /// Row-major entries. Throws std::invalid_argument when the input is not
  /// square, not exactly symmetric, non-finite, or has a negative eigenvalue.
  SpdMatrix(std::size_t dim, std::vector<double> entries);

  static SpdMatrix identity(std::size_t dim);
  static SpdMatrix diagonal(std::span<const double> diag);
  static SpdMatrix scalar(double value);

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * dim_ + j]; }
  std::span<const double> entries() const { return entries_; }
  double trace() const;

  /// t*A + (1-t)*B, or any nonnegative combination.
  static SpdMatrix combine(double wa, const SpdMatrix& a, double wb, const SpdMatrix& b);

 private:
  std::size_t dim_ = 0;
  std::vector<double> entries_;
};

struct SymmetricEigen {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // column k is the eigenvector of values[k], row-major storage
};

/// Cyclic Jacobi rotations. Intended for the small dimensions used here (d <= 3).
SymmetricEigen symmetric_eigen(std::size_t dim, std::span<const double> entries);

/// G(S) = (tr S - d - log det S) / 2.
double entropy_rate(const SpdMatrix& sigma);
double entropy_rate_eigen(std::span<const double> eigenvalues);
/// Scalar shortcut for d = 1.
double entropy_rate_scalar(double sigma);

SpdMatrix spd_sqrt(const SpdMatrix& sigma);

double log_sum_exp(std::span<const double> values);
/// log((1/N) sum exp(v_i)) with a max shift.
double log_mean_exp(std::span<const double> values);

class Grid1D {
 public:
  Grid1D() = default;
  Grid1D(double lo, double hi, std::size_t count);

  /// Grid with spacing `step` that contains `anchor` as a node and covers [lo, hi].
  static Grid1D aligned(double anchor, double lo, double hi, double step);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t count() const { return count_; }
  double step() const { return step_; }
  double node(std::size_t i) const { return i + 1 == count_ ? hi_ : lo_ + step_ * static_cast<double>(i); }
  std::vector<double> nodes() const;
  bool contains(double x) const { return x >= lo_ && x <= hi_; }

  struct Cell {
    std::size_t index;  // left node, index + 1 < count
    double weight;      // weight of the right node, in [0, 1]
    bool clamped;
  };
  /// Cell and linear weight for x, clamping outside [lo, hi].
  Cell locate(double x) const;

  /// Index of the node closest to x.
  std::size_t nearest(double x) const;

  friend bool operator==(const Grid1D& a, const Grid1D& b) {
    return a.lo_ == b.lo_ && a.hi_ == b.hi_ && a.count_ == b.count_;
  }

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::size_t count_ = 2;
  double step_ = 1.0;
};

/// Linear interpolation on a grid with constant extrapolation.
double interpolate(const Grid1D& grid, std::span<const double> values, double x);

/// Expectation rule against the standard normal law.
struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t order() const { return nodes.size(); }
};

/// Golub-Welsch on the probabilists' Hermite Jacobi matrix, with Newton polishing.
/// 2 <= m <= 256.
QuadRule gauss_hermite(int m);

/// Counter-based stream: SplitMix64 evaluated at (key + counter * golden), with
/// key = hash(seed, stream_id). Streams with equal (seed, stream_id) are identical.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Child stream for block `index`; depends only on (seed, stream_id, index).
  RngStream derive(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on (0, 1].
  double uniform();
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

/// Worker count for parallel_for. Results never depend on it.
void set_worker_threads(unsigned count);
unsigned worker_threads();

/// Splits [0, count) into contiguous chunks, one per worker; each index is owned
/// by exactly one call of `body(begin, end)`.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

/// Golden-section minimisation of a convex function. The bracket [lo, hi] is
/// widened (doubling the offending side) while the minimiser sits at an end.
struct ConvexMin {
  double argmin;
  double value;
  double bracket_width;
  int expansions;
};
ConvexMin minimize_convex(const std::function<double(double)>& fn, double lo, double hi,
                          double tol, int max_doublings);

}  // namespace ehedge
