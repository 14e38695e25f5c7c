#include "entropic_hedge/dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "entropic_hedge/hedging.hpp"

namespace ehedge {

PiecewiseControl::PiecewiseControl(std::vector<double> breakpoints, std::vector<SpdMatrix> pieces, double K)
    : breaks_(std::move(breakpoints)), pieces_(std::move(pieces)), K_(K) {
  if (pieces_.empty() || breaks_.size() != pieces_.size() + 1) {
    throw std::invalid_argument("PiecewiseControl: need m pieces and m + 1 breakpoints");
  }
  if (!(K_ >= 1.0)) throw std::invalid_argument("PiecewiseControl: K must be >= 1");
  if (breaks_.front() != 0.0 || breaks_.back() != 1.0) {
    throw std::invalid_argument("PiecewiseControl: breakpoints must run from 0 to 1");
  }
  for (std::size_t j = 0; j + 1 < breaks_.size(); ++j) {
    if (!(breaks_[j] < breaks_[j + 1])) throw std::invalid_argument("PiecewiseControl: breakpoints must increase");
  }
  const double tol = 1e-12;
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    if (pieces_[j].dim() != pieces_.front().dim()) throw std::invalid_argument("PiecewiseControl: mixed dimensions");
    const auto eig = symmetric_eigen(pieces_[j].dim(), pieces_[j].entries());
    if (eig.values.front() < (1.0 / K_) * (1.0 - tol) || eig.values.back() > K_ * (1.0 + tol)) {
      std::ostringstream msg;
      msg << "PiecewiseControl: piece " << j << " has eigenvalues outside [1/K, K] = [" << 1.0 / K_ << ", " << K_ << "]";
      throw std::invalid_argument(msg.str());
    }
  }
}

PiecewiseControl PiecewiseControl::uniform(std::vector<SpdMatrix> pieces, double K) {
  const std::size_t m = pieces.size();
  std::vector<double> breaks(m + 1);
  for (std::size_t j = 0; j <= m; ++j) breaks[j] = static_cast<double>(j) / static_cast<double>(m);
  breaks.back() = 1.0;
  return PiecewiseControl(std::move(breaks), std::move(pieces), K);
}

SpdMatrix PiecewiseControl::integrated() const {
  SpdMatrix acc = SpdMatrix::combine(breaks_[1] - breaks_[0], pieces_[0], 0.0, pieces_[0]);
  for (std::size_t j = 1; j < pieces_.size(); ++j) acc = SpdMatrix::combine(1.0, acc, breaks_[j + 1] - breaks_[j], pieces_[j]);
  return acc;
}

double specific_entropy(const PiecewiseControl& control) {
  double acc = 0.0;
  const auto& t = control.breakpoints();
  for (std::size_t j = 0; j < control.pieces().size(); ++j) acc += (t[j + 1] - t[j]) * entropy_rate(control.pieces()[j]);
  return acc;
}

namespace {

void check_sampled_support(const std::optional<std::vector<Grid1D>>& domain, std::span<const double> p) {
  if (!domain) return;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (!(*domain)[a].contains(p[a])) {
      std::ostringstream msg;
      msg << "objective_deterministic: quadrature node " << p[a] << " leaves the sampled payoff domain ["
          << (*domain)[a].lo() << ", " << (*domain)[a].hi() << "]";
      throw std::invalid_argument(msg.str());
    }
  }
}

double normal_mass(double a, double b) {
  const auto upper = [](double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); };
  return a >= 0.0 ? upper(a) - upper(b) : upper(-b) - upper(-a);
}

double normal_density(double z) { return std::isfinite(z) ? std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI) : 0.0; }

double exact_expectation_1d(const PayoffSpec& f, double mean, double sd) {
  if (const auto domain = sampled_domain(f)) {
    const double outside = normal_mass(-std::numeric_limits<double>::infinity(), ((*domain)[0].lo() - mean) / sd) +
                           normal_mass(((*domain)[0].hi() - mean) / sd, std::numeric_limits<double>::infinity());
    if (outside >= 1e-14) {
      std::ostringstream msg;
      msg << "objective_deterministic: terminal mass " << outside << " leaves the sampled payoff domain ["
          << (*domain)[0].lo() << ", " << (*domain)[0].hi() << "]";
      throw std::invalid_argument(msg.str());
    }
  }
  double acc = 0.0;
  for (const auto& p : linear_pieces_1d(f)) {
    const double zl = (p.lo - mean) / sd;
    const double zr = (p.hi - mean) / sd;
    // E[(A + B Z) 1{zl < Z < zr}] = A (Phi(zr) - Phi(zl)) + B (phi(zl) - phi(zr))
    const double A = p.c0 + p.c1 * mean;
    const double B = p.c1 * sd;
    if (A != 0.0) acc += A * normal_mass(zl, zr);
    if (B != 0.0) acc += B * (normal_density(zl) - normal_density(zr));
  }
  return acc;
}

}  // namespace

DualValue objective_deterministic(const PayoffSpec& f, const PiecewiseControl& control, std::span<const double> S0,
                                  const QuadRule& rule, Integration method) {
  const std::size_t d = control.dim();
  if (S0.size() != d || f.dim() != d) throw std::invalid_argument("objective_deterministic: dimension mismatch");
  if (d > 2) throw std::invalid_argument("objective_deterministic: d <= 2 supported");
  const SpdMatrix root = spd_sqrt(control.integrated());
  const auto domain = sampled_domain(f);
  const std::size_t m = rule.order();
  double payoff = 0.0;
  if (d == 1 && method == Integration::piecewise_exact) {
    payoff = exact_expectation_1d(f, S0[0], root(0, 0));
  } else if (d == 1) {
    for (std::size_t k = 0; k < m; ++k) {
      const double x = S0[0] + root(0, 0) * rule.nodes[k];
      if (rule.weights[k] >= 1e-14) check_sampled_support(domain, std::span<const double>(&x, 1));
      payoff += rule.weights[k] * eval_payoff(f, x);
    }
  } else {
    for (std::size_t a = 0; a < m; ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        const double z0 = rule.nodes[a];
        const double z1 = rule.nodes[b];
        const double p[2] = {S0[0] + root(0, 0) * z0 + root(0, 1) * z1, S0[1] + root(1, 0) * z0 + root(1, 1) * z1};
        if (rule.weights[a] * rule.weights[b] >= 1e-14) check_sampled_support(domain, p);
        row += rule.weights[b] * eval_payoff(f, p);
      }
      payoff += rule.weights[a] * row;
    }
  }
  DualValue v;
  v.payoff_part = payoff;
  v.entropy_part = specific_entropy(control);
  v.value = v.payoff_part - v.entropy_part;
  return v;
}

DualValue objective_feedback(const PayoffSpec& f, const ControlField& field, std::span<const double> S0,
                             std::size_t euler_steps, std::size_t count, const RngStream& rng) {
  const std::size_t d = field.dim();
  if (S0.size() != d || f.dim() != d) throw std::invalid_argument("objective_feedback: dimension mismatch");
  if (euler_steps < 64) throw std::invalid_argument("objective_feedback: euler_steps must be >= 64");
  if (count < 2) throw std::invalid_argument("objective_feedback: need at least 2 paths");
  const auto bounds = control_bounds(field);
  if (!bounds.within(1e-6)) {
    std::ostringstream msg;
    msg << "objective_feedback: control eigenvalues [" << bounds.min_eigen << ", " << bounds.max_eigen
        << "] leave [" << bounds.lower_limit << ", " << bounds.upper_limit << "]";
    throw std::logic_error(msg.str());
  }
  const double dt = 1.0 / static_cast<double>(euler_steps);
  const double sdt = std::sqrt(dt);
  std::vector<double> payoff(count);
  std::vector<double> entropy(count);
  const std::size_t blocks = (count + kPathBlock - 1) / kPathBlock;
  parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
    std::vector<double> x(d);
    for (std::size_t blk = begin; blk < end; ++blk) {
      RngStream local = rng.derive(blk);
      const std::size_t p0 = blk * kPathBlock;
      const std::size_t p1 = std::min(count, p0 + kPathBlock);
      for (std::size_t p = p0; p < p1; ++p) {
        std::copy(S0.begin(), S0.end(), x.begin());
        double ent = 0.0;
        for (std::size_t k = 0; k < euler_steps; ++k) {
          const double t = static_cast<double>(k) * dt;
          if (d == 1) {
            const double s = field.at(t, x[0]);
            ent += entropy_rate_scalar(s);
            x[0] += std::sqrt(s) * sdt * local.normal();
          } else {
            const SpdMatrix s = field.at(t, x);
            ent += entropy_rate(s);
            const SpdMatrix r = spd_sqrt(s);
            const double z0 = local.normal();
            const double z1 = local.normal();
            const double dx0 = (r(0, 0) * z0 + r(0, 1) * z1) * sdt;
            const double dx1 = (r(1, 0) * z0 + r(1, 1) * z1) * sdt;
            x[0] += dx0;
            x[1] += dx1;
          }
        }
        payoff[p] = eval_payoff(f, x);
        entropy[p] = ent * dt;
      }
    }
  });

  const std::size_t batches = std::min<std::size_t>(64, count);
  std::vector<double> means(batches, 0.0);
  double total_pay = 0.0;
  double total_ent = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = b * count / batches;
    const std::size_t hi = (b + 1) * count / batches;
    double acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p) acc += payoff[p] - entropy[p];
    means[b] = acc / static_cast<double>(hi - lo);
  }
  for (std::size_t p = 0; p < count; ++p) {
    total_pay += payoff[p];
    total_ent += entropy[p];
  }
  DualValue v;
  v.payoff_part = total_pay / static_cast<double>(count);
  v.entropy_part = total_ent / static_cast<double>(count);
  v.value = v.payoff_part - v.entropy_part;
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  v.std_err = std::sqrt(var / static_cast<double>(batches - 1) / static_cast<double>(batches));
  return v;
}

PiecewiseOptimum optimize_piecewise(const PayoffSpec& f, std::size_t m, double K, std::span<const double> S0,
                                    const QuadRule& rule, Integration method) {
  if (f.dim() != 1 || S0.size() != 1) throw std::invalid_argument("optimize_piecewise: d must be 1");
  if (m < 1 || m > 8) throw std::invalid_argument("optimize_piecewise: m must lie in [1, 8]");
  if (!(K >= 1.0 && K <= 100.0)) throw std::invalid_argument("optimize_piecewise: K must lie in [1, 100]");
  const double lo = -std::log(K);
  const double hi = std::log(K);
  const double cap = K;
  std::vector<double> logs(m, 0.0);

  const auto build = [&](const std::vector<double>& l) {
    std::vector<SpdMatrix> pieces;
    pieces.reserve(m);
    for (double v : l) pieces.push_back(SpdMatrix::scalar(std::clamp(std::exp(v), 1.0 / cap, cap)));
    return PiecewiseControl::uniform(std::move(pieces), K);
  };
  const auto value_of = [&](const std::vector<double>& l) { return objective_deterministic(f, build(l), S0, rule, method).value; };

  double current = value_of(logs);
  int cycles = 0;
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  for (; cycles < 200; ++cycles) {
    const double start = current;
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> trial = logs;
      const auto g = [&](double x) {
        trial[j] = x;
        return value_of(trial);
      };
      constexpr int kScan = 17;
      double best_x = logs[j];
      double best_v = current;
      for (int i = 0; i < kScan; ++i) {
        const double x = K == 1.0 ? 0.0 : lo + (hi - lo) * i / (kScan - 1);
        const double v = g(x);
        if (v > best_v) {
          best_v = v;
          best_x = x;
        }
      }
      if (K > 1.0) {
        const double cell = (hi - lo) / (kScan - 1);
        double a = std::max(lo, best_x - cell);
        double b = std::min(hi, best_x + cell);
        double c = b - ratio * (b - a);
        double d = a + ratio * (b - a);
        double fc = g(c);
        double fd = g(d);
        while (b - a > 1e-9) {
          if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g(c);
          } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g(d);
          }
        }
        if (fc > best_v) {
          best_v = fc;
          best_x = c;
        }
        if (fd > best_v) {
          best_v = fd;
          best_x = d;
        }
      }
      logs[j] = best_x;
      current = best_v;
    }
    if (current - start < 1e-8) {
      ++cycles;
      break;
    }
  }
  PiecewiseControl control = build(logs);
  DualValue v = objective_deterministic(f, control, S0, rule, method);
  return {std::move(control), v, cycles};
}

double lower_bound_cn(double dual_value, std::span<const double> b, std::size_t n) {
  if (n == 0) throw std::invalid_argument("lower_bound_cn: n must be >= 1");
  double b2 = 0.0;
  for (double v : b) b2 += v * v;
  return dual_value - b2 / (2.0 * static_cast<double>(n));
}

}  // namespace ehedge
