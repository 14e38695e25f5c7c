#pragma once

// Exact n-step certainty equivalent (d = 1) by backward recursion, and the
// one-period primal/entropy duality check.

#include <functional>
#include <iosfwd>
#include <vector>

#include "entropic_hedge/core.hpp"
#include "entropic_hedge/hedging.hpp"
#include "entropic_hedge/payoffs.hpp"

namespace ehedge {

/// Nodal values with linear interpolation and constant extrapolation.
struct GridFunction {
  Grid1D grid;
  std::vector<double> values;

  double operator()(double x) const { return interpolate(grid, values, x); }
  /// Largest absolute slope between neighbouring nodes.
  double lipschitz() const;
};

struct OnePeriodResult {
  double value;
  double gamma_star;
  double bracket_width;
};

/// (1/n) min over gamma of log sum_k w_k exp(n Vnext(x + D_k) - n gamma D_k), D_k = z_k / sqrt(n) + b / n.
/// Golden-section on a bracket grown from +-1.5 (Lip + |b|/n); the bracket may double at
/// most 10 times (std::logic_error beyond that).
OnePeriodResult one_period_value(double x, const GridFunction& Vnext, std::size_t n, double b, const QuadRule& rule,
                                 Integration method = Integration::gauss_hermite);

/// The convex function of gamma minimised by one_period_value (without the 1/n factor).
double one_period_objective(double x, double gamma, const GridFunction& Vnext, std::size_t n, double b,
                            const QuadRule& rule, Integration method = Integration::gauss_hermite);

struct CertEquivResult {
  std::size_t n = 0;
  Grid1D grid;
  std::vector<std::vector<double>> V;           // V[k] for k = 0..n
  std::vector<std::vector<double>> gamma_star;  // gamma_star[k] for k = 0..n-1
  double c_n = 0.0;
  double max_bracket_width = 0.0;
};

/// Requires d = 1, n >= 1, rule order >= 32 and a grid reaching 6 + |b| beyond S0.
CertEquivResult certainty_equivalent(const PayoffSpec& f, std::size_t n, const MarketSpec& market, const Grid1D& grid,
                                     const QuadRule& rule, Integration method = Integration::gauss_hermite);

/// Columns k,node,V,gamma_star (gamma_star empty for k = n).
void write_cert_equiv_csv(std::ostream& os, const CertEquivResult& r);

struct OnePeriodDualReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double lambda = 0.0;
  double gap = 0.0;
  double gamma_star = 0.0;
  double sigma_star = 0.0;
};

/// lhs = inf_gamma log E[exp(phi(Y) - gamma Y)], Y ~ N(lambda, 1);
/// rhs = sup_{1/K <= S <= K} (E phi(sqrt(S) Z) - G(S)) - lambda^2 / 2.
OnePeriodDualReport one_period_dual_check(const std::function<double(double)>& phi, double lambda, double K,
                                          int rule_order = 128);

}  // namespace ehedge
