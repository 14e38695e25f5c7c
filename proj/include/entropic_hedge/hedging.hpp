#pragma once

// Bachelier paths, discrete-time portfolio values and the exponential hedging
// criterion (1/n) log E exp(n (f(S_1) - V_1)) for a fixed strategy.

#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "entropic_hedge/core.hpp"
#include "entropic_hedge/envelope.hpp"
#include "entropic_hedge/hjb.hpp"
#include "entropic_hedge/payoffs.hpp"

namespace ehedge {

struct MarketSpec {
  std::vector<double> S0;
  std::vector<double> b;

  MarketSpec() = default;
  MarketSpec(std::vector<double> S0, std::vector<double> b);
  std::size_t dim() const { return S0.size(); }
  double drift_norm2() const;
};

/// Markov strategy: gamma_i(x) used on the step from i/n to (i+1)/n.
class StrategySpec {
 public:
  /// gamma_i(x) = grad u((i+1)/n, x).
  struct GradientOf {
    std::shared_ptr<const ValueSurface> surface;
    std::shared_ptr<const std::vector<double>> table;  // 1D gradient table, [snapshot][node]
  };
  struct Constant {
    std::vector<double> gamma;
  };
  struct Zero {
    std::size_t dim;
  };
  /// d = 1 table of gamma_i at grid nodes, [i][node], linear in x and clamped.
  struct Tabulated {
    Grid1D grid;
    std::size_t steps;
    std::vector<double> gamma;
  };
  using Variant = std::variant<GradientOf, Constant, Zero, Tabulated>;

  static StrategySpec gradient_of(std::shared_ptr<const ValueSurface> u);
  static StrategySpec constant(std::vector<double> gamma);
  static StrategySpec zero(std::size_t dim);
  static StrategySpec tabulated(Grid1D grid, std::size_t steps, std::vector<double> gamma);

  const Variant& variant() const { return v_; }
  std::size_t dim() const;

  /// gamma_i(x) for a grid of n steps; writes dim() entries into `out`.
  void eval(std::size_t i, std::size_t n, std::span<const double> x, std::span<double> out) const;
  double eval_1d(std::size_t i, std::size_t n, double x) const;

 private:
  explicit StrategySpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

struct PathBatch {
  std::size_t n = 0;
  std::size_t count = 0;
  std::size_t d = 0;
  std::vector<double> S0;
  std::vector<double> increments;  // [path][step][coordinate]
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  std::span<const double> path(std::size_t p) const {
    return std::span<const double>(increments).subspan(p * n * d, n * d);
  }
  std::vector<double> terminal(std::size_t p) const;
};

/// Paths per generator block; block j draws from rng.derive(j).
inline constexpr std::size_t kPathBlock = 4096;

PathBatch simulate_paths(const MarketSpec& market, std::size_t n, std::size_t count, const RngStream& rng);

/// V = sum_i <gamma_i(S_{i/n}), S_{(i+1)/n} - S_{i/n}> per path.
std::vector<double> portfolio_value(const PathBatch& batch, const StrategySpec& strategy);

struct TruncationReport {
  std::size_t heavy_paths = 0;       // paths carrying more than 10% of the exponential mass
  double max_weight_fraction = 0.0;  // largest single-path share of the mass
};

struct CriterionEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::size_t count = 0;
  TruncationReport truncation;
};

inline constexpr std::size_t kBootstrapResamples = 200;

/// Monte Carlo criterion with a bootstrap standard error drawn from a stream derived
/// from the batch's (seed, stream_id).
CriterionEstimate criterion_mc(const PathBatch& batch, const PayoffSpec& f, const StrategySpec& strategy,
                               std::size_t n);

/// How the one-step Gaussian expectations of the backward recursions are computed.
/// gauss_hermite samples the interpolated value function at the rule's nodes. piecewise_exact
/// integrates the linear interpolant against the Gaussian cell by cell in closed form.
enum class Integration { gauss_hermite, piecewise_exact };

const char* to_string(Integration m);

/// log E exp(n (W(x + D) - gamma D)) for D ~ N(mu, 1/n), W the linear interpolant of grid values
/// (constant beyond the grid). Every piece of W is integrated in closed form. Cells are resolved
/// inside a window reaching 8 standard deviations past the tilted centres mu + (beta - gamma), beta
/// ranging over the slopes of W; the edge cells continue linearly beyond it, which leaves a
/// relative error below e^-32.
class PiecewiseGaussianStep {
 public:
  PiecewiseGaussianStep(std::size_t n, double mu);
  /// The grid and values must outlive subsequent log_mgf calls.
  void reset(const Grid1D& grid, std::span<const double> W);
  double log_mgf(double x, double gamma);

 private:
  struct Piece {
    double zl, zr, a, beta;
  };
  void push(double x, double yl, double yr, double a, double beta);
  double n_, mu_, s_;
  const Grid1D* grid_ = nullptr;
  std::span<const double> W_;
  double beta_lo_ = 0.0, beta_hi_ = 0.0;
  std::vector<Piece> pieces_;
  std::vector<double> expo_;
};

/// Backward recursion W_k(x) = (1/n) log E exp(n W_{k+1}(x + D) - n gamma_k(x) D),
/// D ~ N(b/n, 1/n), with linear interpolation of W_{k+1}. Returns W_0(S0).
/// The grid must reach 6 + |b| beyond S0 on both sides. The rule is unused for piecewise_exact.
double criterion_exact_1d(const PayoffSpec& f, const StrategySpec& strategy, std::size_t n, const MarketSpec& market,
                          const Grid1D& grid, const QuadRule& rule, Integration method = Integration::gauss_hermite);
/// Same recursion for a gridded terminal function.
double criterion_exact_1d(const SampledFunction& terminal, const StrategySpec& strategy, std::size_t n,
                          const MarketSpec& market, const Grid1D& grid, const QuadRule& rule,
                          Integration method = Integration::gauss_hermite);

/// Throws std::invalid_argument when [S0 - 6 - |b|, S0 + 6 + |b|] is not inside the grid.
void require_padding(const Grid1D& grid, double S0, double b, const char* who);

}  // namespace ehedge
