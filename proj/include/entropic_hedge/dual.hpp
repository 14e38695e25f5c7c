#pragma once

// Dual objective E[f(S0 + int sqrt(Sigma) dW)] - E[int G(Sigma) dt] for deterministic
// piecewise-constant controls (quadrature) and for HJB feedback controls (Monte Carlo).

#include <span>
#include <vector>

#include "entropic_hedge/core.hpp"
#include "entropic_hedge/hedging.hpp"
#include "entropic_hedge/hjb.hpp"
#include "entropic_hedge/payoffs.hpp"

namespace ehedge {

class PiecewiseControl {
 public:
  /// breakpoints 0 = t_0 < ... < t_m = 1, one SpdMatrix per piece with eigenvalues in [1/K, K].
  PiecewiseControl(std::vector<double> breakpoints, std::vector<SpdMatrix> pieces, double K);
  /// m equal pieces.
  static PiecewiseControl uniform(std::vector<SpdMatrix> pieces, double K);

  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<SpdMatrix>& pieces() const { return pieces_; }
  double K() const { return K_; }
  std::size_t dim() const { return pieces_.front().dim(); }
  /// Integrated covariance sum_j (t_{j+1} - t_j) * piece_j.
  SpdMatrix integrated() const;

 private:
  std::vector<double> breaks_;
  std::vector<SpdMatrix> pieces_;
  double K_;
};

struct DualValue {
  double payoff_part = 0.0;
  double entropy_part = 0.0;
  double value = 0.0;
  double std_err = 0.0;
};

double specific_entropy(const PiecewiseControl& control);

/// Terminal law N(S0, integrated covariance); tensorized quadrature in d = 2.
/// With piecewise_exact and d = 1 the payoff is integrated piece by piece in closed form.
/// Throws std::invalid_argument when a quadrature node of weight >= 1e-14 (or terminal mass
/// >= 1e-14 in exact mode) leaves the grid of a sampled payoff.
DualValue objective_deterministic(const PayoffSpec& f, const PiecewiseControl& control, std::span<const double> S0,
                                  const QuadRule& rule, Integration method = Integration::gauss_hermite);

/// Euler scheme X_{k+1} = X_k + sqrt(Sigma*(t_k, X_k)) dW_k; standard error by batch means.
/// Paths are generated in blocks of kPathBlock with block j drawing from rng.derive(j).
DualValue objective_feedback(const PayoffSpec& f, const ControlField& field, std::span<const double> S0,
                             std::size_t euler_steps, std::size_t count, const RngStream& rng);

struct PiecewiseOptimum {
  PiecewiseControl control;
  DualValue value;
  int cycles;
};

/// d = 1, m <= 8, K <= 100: coordinate-wise golden-section on log Sigma_j in [-log K, log K],
/// cycling until a full cycle improves by less than 1e-8 (at most 200 cycles).
PiecewiseOptimum optimize_piecewise(const PayoffSpec& f, std::size_t m, double K, std::span<const double> S0,
                                    const QuadRule& rule, Integration method = Integration::gauss_hermite);

/// dual_value - |b|^2 / (2n).
double lower_bound_cn(double dual_value, std::span<const double> b, std::size_t n);

}  // namespace ehedge
