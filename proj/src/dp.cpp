#include "entropic_hedge/dp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace ehedge {

double GridFunction::lipschitz() const {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) m = std::max(m, std::abs(values[i + 1] - values[i]));
  return m / grid.step();
}

namespace {

struct StepRule {
  std::vector<double> delta;
  std::vector<double> logw;
};

StepRule step_rule(std::size_t n, double b, const QuadRule& rule) {
  const double nn = static_cast<double>(n);
  StepRule s;
  s.delta.resize(rule.order());
  s.logw.resize(rule.order());
  for (std::size_t k = 0; k < rule.order(); ++k) {
    s.delta[k] = rule.nodes[k] / std::sqrt(nn) + b / nn;
    s.logw[k] = std::log(rule.weights[k]);
  }
  return s;
}

struct StepWorkspace {
  std::vector<double> base;
  std::vector<double> work;
  PiecewiseGaussianStep exact;
  StepWorkspace(std::size_t m, std::size_t n, double b) : base(m), work(m), exact(n, b / static_cast<double>(n)) {}
};

OnePeriodResult minimize_step(double x, const GridFunction& Vnext, std::size_t n, double b, const StepRule& sr,
                              double lip, Integration method, StepWorkspace& ws) {
  const double nn = static_cast<double>(n);
  const std::size_t m = sr.delta.size();
  std::function<double(double)> objective;
  if (method == Integration::piecewise_exact) {
    objective = [&](double gamma) { return ws.exact.log_mgf(x, gamma); };
  } else {
    for (std::size_t k = 0; k < m; ++k) ws.base[k] = sr.logw[k] + nn * Vnext(x + sr.delta[k]);
    objective = [&](double gamma) {
      for (std::size_t k = 0; k < m; ++k) ws.work[k] = ws.base[k] - nn * gamma * sr.delta[k];
      return log_sum_exp(ws.work);
    };
  }
  const double L0 = 1.5 * (lip + std::abs(b) / nn) + 1e-6;
  const auto r = minimize_convex(objective, -L0, L0, 1e-10, 10);
  return {r.value / nn, r.argmin, r.bracket_width};
}

}  // namespace

double one_period_objective(double x, double gamma, const GridFunction& Vnext, std::size_t n, double b,
                            const QuadRule& rule, Integration method) {
  if (method == Integration::piecewise_exact) {
    PiecewiseGaussianStep step(n, b / static_cast<double>(n));
    step.reset(Vnext.grid, Vnext.values);
    return step.log_mgf(x, gamma);
  }
  const auto sr = step_rule(n, b, rule);
  const double nn = static_cast<double>(n);
  std::vector<double> a(rule.order());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = sr.logw[k] + nn * (Vnext(x + sr.delta[k]) - gamma * sr.delta[k]);
  return log_sum_exp(a);
}

OnePeriodResult one_period_value(double x, const GridFunction& Vnext, std::size_t n, double b, const QuadRule& rule,
                                 Integration method) {
  if (n == 0) throw std::invalid_argument("one_period_value: n must be >= 1");
  const auto sr = step_rule(n, b, rule);
  StepWorkspace ws(rule.order(), n, b);
  ws.exact.reset(Vnext.grid, Vnext.values);
  return minimize_step(x, Vnext, n, b, sr, Vnext.lipschitz(), method, ws);
}

CertEquivResult certainty_equivalent(const PayoffSpec& f, std::size_t n, const MarketSpec& market, const Grid1D& grid,
                                     const QuadRule& rule, Integration method) {
  if (f.dim() != 1 || market.dim() != 1) throw std::invalid_argument("certainty_equivalent: d must be 1");
  if (n == 0) throw std::invalid_argument("certainty_equivalent: n must be >= 1");
  if (rule.order() < 32) throw std::invalid_argument("certainty_equivalent: quadrature order must be >= 32");
  require_padding(grid, market.S0[0], market.b[0], "certainty_equivalent");
  const double b = market.b[0];
  const auto sr = step_rule(n, b, rule);

  CertEquivResult r;
  r.n = n;
  r.grid = grid;
  r.V.assign(n + 1, std::vector<double>(grid.count()));
  r.gamma_star.assign(n, std::vector<double>(grid.count()));
  for (std::size_t i = 0; i < grid.count(); ++i) r.V[n][i] = eval_payoff(f, grid.node(i));

  std::vector<double> widths(grid.count(), 0.0);
  for (std::size_t k = n; k-- > 0;) {
    const GridFunction next{grid, r.V[k + 1]};
    const double lip = next.lipschitz();
    parallel_for(grid.count(), [&](std::size_t begin, std::size_t end) {
      StepWorkspace ws(rule.order(), n, b);
      ws.exact.reset(grid, next.values);
      for (std::size_t i = begin; i < end; ++i) {
        const auto step = minimize_step(grid.node(i), next, n, b, sr, lip, method, ws);
        r.V[k][i] = step.value;
        r.gamma_star[k][i] = step.gamma_star;
        widths[i] = std::max(widths[i], step.bracket_width);
      }
    });
  }
  r.max_bracket_width = *std::max_element(widths.begin(), widths.end());
  r.c_n = interpolate(grid, r.V[0], market.S0[0]);
  return r;
}

void write_cert_equiv_csv(std::ostream& os, const CertEquivResult& r) {
  os << std::setprecision(17);
  os << "k,node,V,gamma_star\n";
  for (std::size_t k = 0; k <= r.n; ++k) {
    for (std::size_t i = 0; i < r.grid.count(); ++i) {
      os << k << ',' << r.grid.node(i) << ',' << r.V[k][i] << ',';
      if (k < r.n) os << r.gamma_star[k][i];
      os << '\n';
    }
  }
}

OnePeriodDualReport one_period_dual_check(const std::function<double(double)>& phi, double lambda, double K,
                                          int rule_order) {
  if (!(K >= 1.0)) throw std::invalid_argument("one_period_dual_check: K must be >= 1");
  const QuadRule rule = gauss_hermite(rule_order);
  const std::size_t m = rule.order();
  OnePeriodDualReport rep;
  rep.lambda = lambda;

  std::vector<double> base(m);
  std::vector<double> work(m);
  double slope = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double y = lambda + rule.nodes[k];
    base[k] = std::log(rule.weights[k]) + phi(y);
    if (k > 0) {
      const double dy = rule.nodes[k] - rule.nodes[k - 1];
      slope = std::max(slope, std::abs(phi(y) - phi(y - dy)) / dy);
    }
  }
  const auto primal = [&](double gamma) {
    for (std::size_t k = 0; k < m; ++k) work[k] = base[k] - gamma * (lambda + rule.nodes[k]);
    return log_sum_exp(work);
  };
  const double L0 = 1.5 * (std::min(slope, 50.0) + std::abs(lambda)) + 1.0;
  const auto pmin = minimize_convex(primal, -L0, L0, 1e-10, 10);
  rep.lhs = pmin.value;
  rep.gamma_star = pmin.argmin;

  const auto dual = [&](double log_sigma) {
    const double sigma = std::exp(log_sigma);
    const double root = std::sqrt(sigma);
    double e = 0.0;
    for (std::size_t k = 0; k < m; ++k) e += rule.weights[k] * phi(root * rule.nodes[k]);
    return e - entropy_rate_scalar(sigma);
  };
  const double lo = -std::log(K);
  const double hi = std::log(K);
  constexpr int kScan = 65;
  double best_x = 0.0;
  double best_v = dual(0.0);
  for (int i = 0; i < kScan; ++i) {
    const double x = K == 1.0 ? 0.0 : lo + (hi - lo) * i / (kScan - 1);
    const double v = dual(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  if (K > 1.0) {
    const double cell = (hi - lo) / (kScan - 1);
    double a = std::max(lo, best_x - cell);
    double b = std::min(hi, best_x + cell);
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = dual(c);
    double fd = dual(d);
    while (b - a > 1e-10) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - ratio * (b - a);
        fc = dual(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + ratio * (b - a);
        fd = dual(d);
      }
    }
    for (double x : {c, d}) {
      const double v = x == c ? fc : fd;
      if (v > best_v) {
        best_v = v;
        best_x = x;
      }
    }
  }
  rep.rhs = best_v - 0.5 * lambda * lambda;
  rep.sigma_star = std::exp(best_x);
  rep.gap = rep.lhs - rep.rhs;
  return rep;
}

}  // namespace ehedge
