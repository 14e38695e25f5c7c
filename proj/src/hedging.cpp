#include "entropic_hedge/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ehedge {

MarketSpec::MarketSpec(std::vector<double> S0_in, std::vector<double> b_in) : S0(std::move(S0_in)), b(std::move(b_in)) {
  if (S0.empty() || S0.size() != b.size()) throw std::invalid_argument("MarketSpec: S0 and b must share a dimension");
  for (double v : S0)
    if (!std::isfinite(v)) throw std::invalid_argument("MarketSpec: non-finite S0");
  for (double v : b)
    if (!std::isfinite(v)) throw std::invalid_argument("MarketSpec: non-finite drift");
}

double MarketSpec::drift_norm2() const {
  double s = 0.0;
  for (double v : b) s += v * v;
  return s;
}

StrategySpec StrategySpec::gradient_of(std::shared_ptr<const ValueSurface> u) {
  if (!u) throw std::invalid_argument("StrategySpec::gradient_of: null surface");
  std::shared_ptr<const std::vector<double>> table;
  if (u->dim() == 1) table = std::make_shared<const std::vector<double>>(gradient_table_1d(*u));
  return StrategySpec(GradientOf{std::move(u), std::move(table)});
}

StrategySpec StrategySpec::constant(std::vector<double> gamma) {
  if (gamma.empty()) throw std::invalid_argument("StrategySpec::constant: empty vector");
  return StrategySpec(Constant{std::move(gamma)});
}

StrategySpec StrategySpec::zero(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("StrategySpec::zero: dimension must be > 0");
  return StrategySpec(Zero{dim});
}

StrategySpec StrategySpec::tabulated(Grid1D grid, std::size_t steps, std::vector<double> gamma) {
  if (steps == 0 || gamma.size() != steps * grid.count()) {
    throw std::invalid_argument("StrategySpec::tabulated: table must hold steps x nodes entries");
  }
  return StrategySpec(Tabulated{grid, steps, std::move(gamma)});
}

std::size_t StrategySpec::dim() const {
  return std::visit(
      [](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GradientOf>) {
          return s.surface->dim();
        } else if constexpr (std::is_same_v<T, Constant>) {
          return s.gamma.size();
        } else if constexpr (std::is_same_v<T, Zero>) {
          return s.dim;
        } else {
          return 1;
        }
      },
      v_);
}

namespace {

double table_lookup(const ValueSurface& u, const std::vector<double>& table, double t, double x) {
  const std::size_t S = u.snapshots;
  const std::size_t N = u.axes[0].count();
  const double pos = std::clamp(t, 0.0, 1.0) * static_cast<double>(S);
  const double r = std::round(pos);
  const std::span<const double> all(table);
  if (std::abs(pos - r) < 1e-9) {
    const auto s = static_cast<std::size_t>(r);
    return interpolate(u.axes[0], all.subspan(s * N, N), x);
  }
  auto s = std::min(static_cast<std::size_t>(pos), S - 1);
  const double w = pos - static_cast<double>(s);
  const double a = interpolate(u.axes[0], all.subspan(s * N, N), x);
  const double b = interpolate(u.axes[0], all.subspan((s + 1) * N, N), x);
  return a + w * (b - a);
}

}  // namespace

void StrategySpec::eval(std::size_t i, std::size_t n, std::span<const double> x, std::span<double> out) const {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GradientOf>) {
          const double t = static_cast<double>(i + 1) / static_cast<double>(n);
          if (s.table) {
            out[0] = table_lookup(*s.surface, *s.table, t, x[0]);
          } else {
            const auto g = gradient_at(*s.surface, t, x);
            std::copy(g.value.begin(), g.value.end(), out.begin());
          }
        } else if constexpr (std::is_same_v<T, Constant>) {
          std::copy(s.gamma.begin(), s.gamma.end(), out.begin());
        } else if constexpr (std::is_same_v<T, Zero>) {
          std::fill(out.begin(), out.end(), 0.0);
        } else {
          if (n != s.steps) throw std::invalid_argument("StrategySpec: tabulated strategy built for a different n");
          out[0] = interpolate(s.grid, std::span<const double>(s.gamma).subspan(i * s.grid.count(), s.grid.count()), x[0]);
        }
      },
      v_);
}

double StrategySpec::eval_1d(std::size_t i, std::size_t n, double x) const {
  double out = 0.0;
  eval(i, n, std::span<const double>(&x, 1), std::span<double>(&out, 1));
  return out;
}

std::vector<double> PathBatch::terminal(std::size_t p) const {
  std::vector<double> s(S0);
  const auto inc = path(p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) s[a] += inc[i * d + a];
  return s;
}

PathBatch simulate_paths(const MarketSpec& market, std::size_t n, std::size_t count, const RngStream& rng) {
  if (n == 0 || count == 0) throw std::invalid_argument("simulate_paths: need n >= 1 and count >= 1");
  PathBatch batch;
  batch.n = n;
  batch.count = count;
  batch.d = market.dim();
  batch.S0 = market.S0;
  batch.seed = rng.seed();
  batch.stream_id = rng.stream_id();
  batch.increments.resize(count * n * batch.d);
  const double sd = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> mean(batch.d);
  for (std::size_t a = 0; a < batch.d; ++a) mean[a] = market.b[a] / static_cast<double>(n);
  const std::size_t blocks = (count + kPathBlock - 1) / kPathBlock;
  const std::size_t per_path = n * batch.d;
  parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
    for (std::size_t blk = begin; blk < end; ++blk) {
      RngStream local = rng.derive(blk);
      const std::size_t p0 = blk * kPathBlock;
      const std::size_t p1 = std::min(count, p0 + kPathBlock);
      double* out = batch.increments.data() + p0 * per_path;
      for (std::size_t k = 0; k < (p1 - p0) * per_path; ++k) out[k] = mean[k % batch.d] + sd * local.normal();
    }
  });
  return batch;
}

std::vector<double> portfolio_value(const PathBatch& batch, const StrategySpec& strategy) {
  if (strategy.dim() != batch.d) throw std::invalid_argument("portfolio_value: strategy dimension mismatch");
  std::vector<double> out(batch.count);
  parallel_for(batch.count, [&](std::size_t begin, std::size_t end) {
    std::vector<double> s(batch.d);
    std::vector<double> g(batch.d);
    for (std::size_t p = begin; p < end; ++p) {
      std::copy(batch.S0.begin(), batch.S0.end(), s.begin());
      const auto inc = batch.path(p);
      double v = 0.0;
      for (std::size_t i = 0; i < batch.n; ++i) {
        strategy.eval(i, batch.n, s, g);
        for (std::size_t a = 0; a < batch.d; ++a) {
          if (!std::isfinite(g[a])) {
            std::ostringstream msg;
            msg << "portfolio_value: strategy is not finite on path " << p << " at step " << i;
            throw std::runtime_error(msg.str());
          }
          const double dS = inc[i * batch.d + a];
          v += g[a] * dS;
          s[a] += dS;
        }
      }
      out[p] = v;
    }
  });
  return out;
}

CriterionEstimate criterion_mc(const PathBatch& batch, const PayoffSpec& f, const StrategySpec& strategy,
                               std::size_t n) {
  if (batch.n != n) throw std::invalid_argument("criterion_mc: batch was simulated with a different n");
  if (f.dim() != batch.d) throw std::invalid_argument("criterion_mc: payoff dimension mismatch");
  const auto V = portfolio_value(batch, strategy);
  const double scale = static_cast<double>(n);
  std::vector<double> a(batch.count);
  for (std::size_t p = 0; p < batch.count; ++p) a[p] = scale * (eval_payoff(f, batch.terminal(p)) - V[p]);

  CriterionEstimate est;
  est.count = batch.count;
  est.value = log_mean_exp(a) / scale;

  const double top = *std::max_element(a.begin(), a.end());
  double mass = 0.0;
  double biggest = 0.0;
  for (double v : a) {
    const double w = std::exp(v - top);
    mass += w;
    biggest = std::max(biggest, w);
  }
  for (double v : a)
    if (std::exp(v - top) > 0.1 * mass) ++est.truncation.heavy_paths;
  est.truncation.max_weight_fraction = biggest / mass;

  RngStream boot = RngStream(batch.seed, batch.stream_id).derive(~std::uint64_t{0});
  std::vector<double> stats(kBootstrapResamples);
  std::vector<double> resample(batch.count);
  for (auto& st : stats) {
    for (auto& r : resample) r = a[boot.below(batch.count)];
    st = log_mean_exp(resample) / scale;
  }
  double mean = 0.0;
  for (double s : stats) mean += s;
  mean /= static_cast<double>(stats.size());
  double var = 0.0;
  for (double s : stats) var += (s - mean) * (s - mean);
  est.std_err = std::sqrt(var / static_cast<double>(stats.size() - 1));
  return est;
}

void require_padding(const Grid1D& grid, double S0, double b, const char* who) {
  const double pad = 6.0 + std::abs(b);
  if (grid.lo() > S0 - pad + 1e-12 || grid.hi() < S0 + pad - 1e-12) {
    std::ostringstream msg;
    msg << who << ": grid [" << grid.lo() << ", " << grid.hi() << "] must cover [S0 - " << pad << ", S0 + " << pad
        << "] = [" << S0 - pad << ", " << S0 + pad << "]";
    throw std::invalid_argument(msg.str());
  }
}

const char* to_string(Integration m) {
  return m == Integration::gauss_hermite ? "gauss_hermite" : "piecewise_exact";
}

namespace {

// upper normal tail Q(z) = P(Z > z) and its logarithm
double upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double log_upper_tail(double z) {
  if (z < 30.0) return std::log(upper_tail(z));
  if (std::isinf(z)) return -std::numeric_limits<double>::infinity();
  const double r = 1.0 / (z * z);
  return -0.5 * z * z - std::log(z) - 0.5 * std::log(2.0 * M_PI) + std::log1p(r * (-1.0 + r * (3.0 - 15.0 * r)));
}

// log(Phi(b) - Phi(a)) for a < b, either end possibly infinite
double log_normal_mass(double a, double b) {
  if (a >= 0.0) {
    if (a < 30.0) return std::log(upper_tail(a) - upper_tail(b));
    const double la = log_upper_tail(a);
    return la + std::log1p(-std::exp(log_upper_tail(b) - la));
  }
  if (b <= 0.0) return log_normal_mass(-b, -a);
  return std::log1p(-(upper_tail(-a) + upper_tail(b)));
}

}  // namespace

PiecewiseGaussianStep::PiecewiseGaussianStep(std::size_t n, double mu)
    : n_(static_cast<double>(n)), mu_(mu), s_(1.0 / std::sqrt(static_cast<double>(n))) {
  if (n == 0) throw std::invalid_argument("PiecewiseGaussianStep: n must be >= 1");
}

void PiecewiseGaussianStep::push(double x, double yl, double yr, double a, double beta) {
  if (!(yl < yr)) return;
  const double zl = (yl - x - mu_) / s_;
  const double zr = (yr - x - mu_) / s_;
  // collinear neighbours share one piece
  if (!pieces_.empty()) {
    Piece& prev = pieces_.back();
    if (std::abs(prev.beta - beta) <= 1e-12 && std::abs(prev.a - a) <= 1e-12) {
      prev.zr = zr;
      return;
    }
  }
  pieces_.push_back({zl, zr, a, beta});
}

void PiecewiseGaussianStep::reset(const Grid1D& grid, std::span<const double> W) {
  if (W.size() != grid.count()) throw std::invalid_argument("PiecewiseGaussianStep: value count does not match grid");
  grid_ = &grid;
  W_ = W;
  beta_lo_ = 0.0;  // the constant extension has slope 0
  beta_hi_ = 0.0;
  for (std::size_t i = 0; i + 1 < W.size(); ++i) {
    const double beta = (W[i + 1] - W[i]) / grid.step();
    beta_lo_ = std::min(beta_lo_, beta);
    beta_hi_ = std::max(beta_hi_, beta);
  }
}

double PiecewiseGaussianStep::log_mgf(double x, double gamma) {
  if (grid_ == nullptr) throw std::logic_error("PiecewiseGaussianStep: reset before log_mgf");
  constexpr double kWindow = 8.0;
  const double inf = std::numeric_limits<double>::infinity();
  const Grid1D& grid = *grid_;
  const auto W = W_;
  const double h = grid.step();
  const std::size_t cells = grid.count() - 1;
  const double lo = x + mu_ + (beta_lo_ - gamma) - kWindow * s_;
  const double hi = x + mu_ + (beta_hi_ - gamma) + kWindow * s_;
  const auto cell_of = [&](double y) {
    const double t = std::floor((y - grid.lo()) / h);
    return static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(cells - 1)));
  };
  const auto slope = [&](std::size_t i) { return (W[i + 1] - W[i]) / h; };
  // W(x + D) = a + beta D on a piece
  const auto offset = [&](std::size_t i, double beta) { return W[i] + beta * (x - grid.node(i)); };
  pieces_.clear();
  const std::size_t first = cell_of(lo);
  const std::size_t last = cell_of(hi);
  if (lo <= grid.lo()) {
    push(x, -inf, grid.lo(), W.front(), 0.0);
  } else {
    const double beta = slope(first);
    push(x, -inf, grid.node(first), offset(first, beta), beta);
  }
  for (std::size_t i = first; i <= last; ++i) {
    const double beta = slope(i);
    push(x, grid.node(i), grid.node(i + 1), offset(i, beta), beta);
  }
  if (hi >= grid.hi()) {
    push(x, grid.hi(), inf, W.back(), 0.0);
  } else {
    const double beta = slope(last);
    push(x, grid.node(last + 1), inf, offset(last, beta), beta);
  }

  expo_.resize(pieces_.size());
  double top = -inf;
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    const Piece& p = pieces_[j];
    const double d = p.beta - gamma;
    const double c = n_ * d * s_;
    expo_[j] = n_ * (p.a + d * mu_) + 0.5 * c * c + log_normal_mass(p.zl - c, p.zr - c);
    top = std::max(top, expo_[j]);
  }
  if (!std::isfinite(top)) throw std::runtime_error("PiecewiseGaussianStep: expectation is not finite");
  double acc = 0.0;
  for (double e : expo_) acc += std::exp(e - top);
  return top + std::log(acc);
}

namespace {

double backward_recursion(std::vector<double> W, const StrategySpec& strategy, std::size_t n, const MarketSpec& market,
                          const Grid1D& grid, const QuadRule& rule, Integration method) {
  if (market.dim() != 1 || strategy.dim() != 1) throw std::invalid_argument("criterion_exact_1d: d must be 1");
  require_padding(grid, market.S0[0], market.b[0], "criterion_exact_1d");
  const double nn = static_cast<double>(n);
  const std::size_t m = rule.order();
  std::vector<double> delta(m);
  std::vector<double> logw(m);
  for (std::size_t j = 0; j < m; ++j) {
    delta[j] = market.b[0] / nn + rule.nodes[j] / std::sqrt(nn);
    logw[j] = std::log(rule.weights[j]);
  }
  std::vector<double> next(W.size());
  for (std::size_t k = n; k-- > 0;) {
    parallel_for(grid.count(), [&](std::size_t begin, std::size_t end) {
      std::vector<double> a(m);
      PiecewiseGaussianStep step(n, market.b[0] / nn);
      step.reset(grid, W);
      for (std::size_t i = begin; i < end; ++i) {
        const double x = grid.node(i);
        const double gamma = strategy.eval_1d(k, n, x);
        if (method == Integration::piecewise_exact) {
          next[i] = step.log_mgf(x, gamma) / nn;
          continue;
        }
        for (std::size_t j = 0; j < m; ++j) {
          a[j] = logw[j] + nn * (interpolate(grid, W, x + delta[j]) - gamma * delta[j]);
        }
        next[i] = log_sum_exp(a) / nn;
      }
    });
    std::swap(W, next);
  }
  return interpolate(grid, W, market.S0[0]);
}

}  // namespace

double criterion_exact_1d(const PayoffSpec& f, const StrategySpec& strategy, std::size_t n, const MarketSpec& market,
                          const Grid1D& grid, const QuadRule& rule, Integration method) {
  if (f.dim() != 1) throw std::invalid_argument("criterion_exact_1d: payoff must be one-dimensional");
  if (n == 0) throw std::invalid_argument("criterion_exact_1d: n must be >= 1");
  std::vector<double> W(grid.count());
  for (std::size_t i = 0; i < W.size(); ++i) W[i] = eval_payoff(f, grid.node(i));
  return backward_recursion(std::move(W), strategy, n, market, grid, rule, method);
}

double criterion_exact_1d(const SampledFunction& terminal, const StrategySpec& strategy, std::size_t n,
                          const MarketSpec& market, const Grid1D& grid, const QuadRule& rule,
                          Integration method) {
  if (terminal.dim() != 1) throw std::invalid_argument("criterion_exact_1d: terminal must be one-dimensional");
  if (n == 0) throw std::invalid_argument("criterion_exact_1d: n must be >= 1");
  std::vector<double> W(grid.count());
  for (std::size_t i = 0; i < W.size(); ++i) W[i] = terminal.at(grid.node(i));
  return backward_recursion(std::move(W), strategy, n, market, grid, rule, method);
}

}  // namespace ehedge
