#include "entropic_hedge/payoffs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace ehedge {
namespace {

void require_finite_nonnegative(std::span<const double> a, const char* what) {
  for (double v : a) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument(std::string(what) + ": coefficients must be finite and >= 0");
  }
}

double weighted_abs_sum(std::span<const double> a, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * std::abs(x[i]);
  return s;
}

double euclid(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double min_positive(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) {
    if (v > 0.0 && (m == 0.0 || v < m)) m = v;
  }
  return m;
}

bool is_nonnegative(const PayoffSpec& spec) {
  return std::visit(
      [](const auto& p) -> bool {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Sampled>) {
          return std::all_of(p.values.begin(), p.values.end(), [](double v) { return v >= 0.0; });
        } else if constexpr (std::is_same_v<T, LinearAdjusted>) {
          const bool flat = std::all_of(p.c.begin(), p.c.end(), [](double v) { return v == 0.0; });
          return flat && p.c0 >= 0.0 && is_nonnegative(*p.base);
        } else {
          return true;
        }
      },
      spec.variant());
}

double eval_sampled(const Sampled& s, std::span<const double> x) {
  if (s.axes.size() == 1) return interpolate(s.axes[0], s.values, x[0]);
  const auto cx = s.axes[0].locate(x[0]);
  const auto cy = s.axes[1].locate(x[1]);
  const std::size_t ny = s.axes[1].count();
  const auto at = [&](std::size_t i, std::size_t j) { return s.values[i * ny + j]; };
  const double v0 = at(cx.index, cy.index) + cy.weight * (at(cx.index, cy.index + 1) - at(cx.index, cy.index));
  const double v1 = at(cx.index + 1, cy.index) + cy.weight * (at(cx.index + 1, cy.index + 1) - at(cx.index + 1, cy.index));
  return v0 + cx.weight * (v1 - v0);
}

const PayoffSpec& strip_linear(const PayoffSpec& spec) {
  if (const auto* la = std::get_if<LinearAdjusted>(&spec.variant())) return strip_linear(*la->base);
  return spec;
}

}  // namespace

PayoffSpec PayoffSpec::put(double K, std::vector<double> a) {
  if (!std::isfinite(K) || K < 0.0) throw std::invalid_argument("put: K must be finite and >= 0");
  if (a.empty()) throw std::invalid_argument("put: empty coefficient vector");
  require_finite_nonnegative(a, "put");
  const std::size_t d = a.size();
  return PayoffSpec(Put{K, std::move(a)}, d);
}

PayoffSpec PayoffSpec::truncated_call(double K1, double K2, std::vector<double> a) {
  if (!std::isfinite(K1) || !std::isfinite(K2) || K1 < 0.0 || K2 < 0.0) {
    throw std::invalid_argument("truncated_call: K1, K2 must be finite and >= 0");
  }
  if (a.empty()) throw std::invalid_argument("truncated_call: empty coefficient vector");
  require_finite_nonnegative(a, "truncated_call");
  const std::size_t d = a.size();
  return PayoffSpec(TruncatedCall{K1, K2, std::move(a)}, d);
}

PayoffSpec PayoffSpec::barrier(PayoffSpec inner, double K) {
  if (!std::isfinite(K) || K <= 0.0) throw std::invalid_argument("barrier: K must be finite and > 0");
  if (!payoff_bound(inner)) throw std::invalid_argument("barrier: inner payoff must be bounded");
  if (!is_nonnegative(inner)) throw std::invalid_argument("barrier: inner payoff must be nonnegative");
  const std::size_t d = inner.dim();
  return PayoffSpec(Barrier{std::make_shared<const PayoffSpec>(std::move(inner)), K}, d);
}

PayoffSpec PayoffSpec::linear_adjusted(double c0, std::vector<double> c, PayoffSpec base) {
  if (c.size() != base.dim()) throw std::invalid_argument("linear_adjusted: coefficient dimension mismatch");
  if (!std::isfinite(c0) || std::any_of(c.begin(), c.end(), [](double v) { return !std::isfinite(v); })) {
    throw std::invalid_argument("linear_adjusted: non-finite coefficient");
  }
  const std::size_t d = base.dim();
  return PayoffSpec(LinearAdjusted{c0, std::move(c), std::make_shared<const PayoffSpec>(std::move(base))}, d);
}

PayoffSpec PayoffSpec::sampled(std::vector<Grid1D> axes, std::vector<double> values, bool declared_bounded) {
  if (axes.empty() || axes.size() > 2) throw std::invalid_argument("sampled: 1 or 2 axes supported");
  std::size_t n = 1;
  for (const auto& g : axes) n *= g.count();
  if (values.size() != n) throw std::invalid_argument("sampled: value count does not match grid");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("sampled: non-finite value");
  }
  const std::size_t d = axes.size();
  return PayoffSpec(Sampled{std::move(axes), std::move(values), declared_bounded}, d);
}

PayoffSpec constant_payoff(double c, std::size_t d) {
  return PayoffSpec::linear_adjusted(c, std::vector<double>(d, 0.0), PayoffSpec::put(0.0, std::vector<double>(d, 0.0)));
}

double eval_payoff(const PayoffSpec& spec, std::span<const double> x) {
  if (x.size() != spec.dim()) {
    throw std::invalid_argument("eval_payoff: point has dimension " + std::to_string(x.size()) + ", payoff expects " +
                                std::to_string(spec.dim()));
  }
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Put>) {
          return std::max(0.0, p.K - weighted_abs_sum(p.a, x));
        } else if constexpr (std::is_same_v<T, TruncatedCall>) {
          return std::min(p.K1, std::max(0.0, weighted_abs_sum(p.a, x) - p.K2));
        } else if constexpr (std::is_same_v<T, Barrier>) {
          return euclid(x) < p.K ? eval_payoff(*p.inner, x) : 0.0;
        } else if constexpr (std::is_same_v<T, LinearAdjusted>) {
          double v = p.c0;
          for (std::size_t i = 0; i < x.size(); ++i) v += p.c[i] * x[i];
          return v + eval_payoff(*p.base, x);
        } else {
          return eval_sampled(p, x);
        }
      },
      spec.variant());
}

std::optional<double> payoff_bound(const PayoffSpec& spec) {
  return std::visit(
      [](const auto& p) -> std::optional<double> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Put>) {
          return p.K;
        } else if constexpr (std::is_same_v<T, TruncatedCall>) {
          return p.K1;
        } else if constexpr (std::is_same_v<T, Barrier>) {
          return payoff_bound(*p.inner);
        } else if constexpr (std::is_same_v<T, LinearAdjusted>) {
          return payoff_bound(*p.base);
        } else {
          if (!p.declared_bounded) return std::nullopt;
          double m = 0.0;
          for (double v : p.values) m = std::max(m, std::abs(v));
          return m;
        }
      },
      spec.variant());
}

double payoff_lipschitz(const PayoffSpec& spec) {
  return std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Put> || std::is_same_v<T, TruncatedCall>) {
          return euclid(p.a);
        } else if constexpr (std::is_same_v<T, Barrier>) {
          return payoff_lipschitz(*p.inner);
        } else if constexpr (std::is_same_v<T, LinearAdjusted>) {
          return payoff_lipschitz(*p.base);
        } else {
          if (p.axes.size() == 1) {
            double m = 0.0;
            for (std::size_t i = 0; i + 1 < p.values.size(); ++i) {
              m = std::max(m, std::abs(p.values[i + 1] - p.values[i]) / p.axes[0].step());
            }
            return m;
          }
          const std::size_t nx = p.axes[0].count();
          const std::size_t ny = p.axes[1].count();
          double mx = 0.0;
          double my = 0.0;
          for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) {
              if (i + 1 < nx) mx = std::max(mx, std::abs(p.values[(i + 1) * ny + j] - p.values[i * ny + j]) / p.axes[0].step());
              if (j + 1 < ny) my = std::max(my, std::abs(p.values[i * ny + j + 1] - p.values[i * ny + j]) / p.axes[1].step());
            }
          }
          return std::hypot(mx, my);
        }
      },
      spec.variant());
}

std::vector<double> kink_functions(const PayoffSpec& spec, std::span<const double> x) {
  std::vector<double> out;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Put> || std::is_same_v<T, TruncatedCall>) {
          for (std::size_t i = 0; i < p.a.size(); ++i) {
            if (p.a[i] > 0.0) out.push_back(x[i]);
          }
          const double s = weighted_abs_sum(p.a, x);
          if constexpr (std::is_same_v<T, Put>) {
            out.push_back(s - p.K);
          } else {
            out.push_back(s - p.K2);
            out.push_back(s - p.K2 - p.K1);
          }
        } else if constexpr (std::is_same_v<T, Barrier>) {
          out.push_back(euclid(x) - p.K);
          const auto inner = kink_functions(*p.inner, x);
          out.insert(out.end(), inner.begin(), inner.end());
        } else if constexpr (std::is_same_v<T, LinearAdjusted>) {
          out = kink_functions(*p.base, x);
        }
      },
      spec.variant());
  return out;
}

double characteristic_radius(const PayoffSpec& spec) {
  const double r = std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Put>) {
          const double a = min_positive(p.a);
          return a > 0.0 ? p.K / a : 1.0;
        } else if constexpr (std::is_same_v<T, TruncatedCall>) {
          const double a = min_positive(p.a);
          return a > 0.0 ? (p.K1 + p.K2) / a : 1.0;
        } else if constexpr (std::is_same_v<T, Barrier>) {
          return std::max(p.K, characteristic_radius(*p.inner));
        } else if constexpr (std::is_same_v<T, LinearAdjusted>) {
          return characteristic_radius(*p.base);
        } else {
          double m = 0.0;
          for (const auto& g : p.axes) m = std::max({m, std::abs(g.lo()), std::abs(g.hi())});
          return m;
        }
      },
      spec.variant());
  return std::max(r, 1e-3);
}

namespace {

void breakpoints_1d(const PayoffSpec& spec, std::vector<double>& out) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Put>) {
          if (p.a[0] > 0.0) out.insert(out.end(), {-p.K / p.a[0], 0.0, p.K / p.a[0]});
        } else if constexpr (std::is_same_v<T, TruncatedCall>) {
          if (p.a[0] > 0.0) {
            const double r0 = std::max(p.K2, 0.0) / p.a[0];
            const double r1 = (p.K1 + p.K2) / p.a[0];
            out.insert(out.end(), {-r1, -r0, 0.0, r0, r1});
          }
        } else if constexpr (std::is_same_v<T, Barrier>) {
          out.insert(out.end(), {-p.K, p.K});
          breakpoints_1d(*p.inner, out);
        } else if constexpr (std::is_same_v<T, LinearAdjusted>) {
          breakpoints_1d(*p.base, out);
        } else {
          for (std::size_t i = 0; i < p.axes[0].count(); ++i) out.push_back(p.axes[0].node(i));
        }
      },
      spec.variant());
}

}  // namespace

std::vector<LinearPiece> linear_pieces_1d(const PayoffSpec& spec) {
  if (spec.dim() != 1) throw std::invalid_argument("linear_pieces_1d: payoff must be one-dimensional");
  std::vector<double> bp;
  breakpoints_1d(spec, bp);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<LinearPiece> out;
  const auto fit = [&](double lo, double hi, double x1, double x2) {
    const double f1 = eval_payoff(spec, x1);
    const double c1 = (eval_payoff(spec, x2) - f1) / (x2 - x1);
    out.push_back({lo, hi, f1 - c1 * x1, c1});
  };
  if (bp.empty()) {
    fit(-inf, inf, 0.0, 1.0);
    return out;
  }
  fit(-inf, bp.front(), bp.front() - 2.0, bp.front() - 1.0);
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const double w = bp[i + 1] - bp[i];
    fit(bp[i], bp[i + 1], bp[i] + w / 3.0, bp[i] + 2.0 * w / 3.0);
  }
  fit(bp.back(), inf, bp.back() + 1.0, bp.back() + 2.0);
  return out;
}

std::optional<std::vector<Grid1D>> sampled_domain(const PayoffSpec& spec) {
  return std::visit(
      [](const auto& p) -> std::optional<std::vector<Grid1D>> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Sampled>) {
          return p.axes;
        } else if constexpr (std::is_same_v<T, Barrier>) {
          return sampled_domain(*p.inner);
        } else if constexpr (std::is_same_v<T, LinearAdjusted>) {
          return sampled_domain(*p.base);
        } else {
          return std::nullopt;
        }
      },
      spec.variant());
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::hessian: return "hessian";
    case ViolationKind::bound: return "bound";
    case ViolationKind::gradient: return "gradient";
    case ViolationKind::unbounded: return "unbounded";
  }
  return "unknown";
}

AssumptionReport validate_assumption(const PayoffSpec& spec, double M, double alpha, std::span<const Grid1D> probe) {
  if (!(M > 0.0)) throw std::invalid_argument("validate_assumption: M must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("validate_assumption: alpha must lie in (0, 1]");
  if (probe.size() != spec.dim()) throw std::invalid_argument("validate_assumption: probe dimension mismatch");
  if (spec.dim() > 2) throw std::invalid_argument("validate_assumption: d <= 2 supported");

  const PayoffSpec& base = strip_linear(spec);
  AssumptionReport report;
  report.M = M;
  report.alpha = alpha;
  const auto bound = payoff_bound(base);
  if (!bound) report.violations.push_back({{}, ViolationKind::unbounded, 0.0});
  const double lip = payoff_lipschitz(base);
  const double hess_limit = 1.0 - alpha + kHessianProbeTol;
  double observed_sup = 0.0;

  const auto f = [&](std::span<const double> p) { return eval_payoff(base, p); };
  const auto straddles_kink = [&](const std::vector<std::vector<double>>& pts) {
    std::vector<double> lo, hi;
    for (const auto& p : pts) {
      const auto k = kink_functions(base, p);
      if (lo.empty()) {
        lo = k;
        hi = k;
      }
      for (std::size_t i = 0; i < k.size(); ++i) {
        lo[i] = std::min(lo[i], k[i]);
        hi[i] = std::max(hi[i], k[i]);
      }
    }
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (lo[i] <= 0.0 && hi[i] >= 0.0 && (lo[i] != 0.0 || hi[i] != 0.0)) return true;
    }
    return false;
  };

  if (spec.dim() == 1) {
    const Grid1D& g = probe[0];
    const double h = g.step();
    for (std::size_t i = 1; i + 1 < g.count(); ++i) {
      const double x = g.node(i);
      if (std::abs(x) - h <= M) continue;
      std::vector<std::vector<double>> pts{{x - h}, {x}, {x + h}};
      if (straddles_kink(pts)) continue;
      ++report.probed_nodes;
      const double fm = f(pts[0]);
      const double f0 = f(pts[1]);
      const double fp = f(pts[2]);
      observed_sup = std::max(observed_sup, std::abs(f0));
      const double d2 = (fp - 2.0 * f0 + fm) / (h * h);
      const double d1 = (fp - fm) / (2.0 * h);
      if (d2 > hess_limit) report.violations.push_back({{x}, ViolationKind::hessian, d2});
      if (std::abs(d1) > lip + 1e-6) report.violations.push_back({{x}, ViolationKind::gradient, d1});
      if (bound && std::abs(f0) > *bound + 1e-12) report.violations.push_back({{x}, ViolationKind::bound, f0});
    }
  } else {
    const Grid1D& gx = probe[0];
    const Grid1D& gy = probe[1];
    const double hx = gx.step();
    const double hy = gy.step();
    const double reach = std::hypot(hx, hy);
    for (std::size_t i = 1; i + 1 < gx.count(); ++i) {
      for (std::size_t j = 1; j + 1 < gy.count(); ++j) {
        const double x = gx.node(i);
        const double y = gy.node(j);
        if (std::hypot(x, y) - reach <= M) continue;
        std::vector<std::vector<double>> pts;
        for (int a = -1; a <= 1; ++a)
          for (int b = -1; b <= 1; ++b) pts.push_back({x + a * hx, y + b * hy});
        if (straddles_kink(pts)) continue;
        ++report.probed_nodes;
        std::vector<double> v(9);
        for (std::size_t k = 0; k < 9; ++k) v[k] = f(pts[k]);
        // pts[(a+1)*3 + (b+1)]
        const double f0 = v[4];
        observed_sup = std::max(observed_sup, std::abs(f0));
        const double fxx = (v[7] - 2.0 * f0 + v[1]) / (hx * hx);
        const double fyy = (v[5] - 2.0 * f0 + v[3]) / (hy * hy);
        const double fxy = (v[8] - v[6] - v[2] + v[0]) / (4.0 * hx * hy);
        const double top = 0.5 * (fxx + fyy) + std::hypot(0.5 * (fxx - fyy), fxy);
        const double gxv = (v[7] - v[1]) / (2.0 * hx);
        const double gyv = (v[5] - v[3]) / (2.0 * hy);
        if (top > hess_limit) report.violations.push_back({{x, y}, ViolationKind::hessian, top});
        if (std::hypot(gxv, gyv) > lip + 1e-6) {
          report.violations.push_back({{x, y}, ViolationKind::gradient, std::hypot(gxv, gyv)});
        }
        if (bound && std::abs(f0) > *bound + 1e-12) report.violations.push_back({{x, y}, ViolationKind::bound, f0});
      }
    }
  }
  report.bound_sup = bound ? *bound : observed_sup;
  report.passed = report.violations.empty();
  return report;
}

AssumptionReport find_assumption_radius(const PayoffSpec& spec, double alpha, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("find_assumption_radius: step must be > 0");
  const double R = characteristic_radius(spec);
  std::set<double> candidates{R + 1.0, 2.0 * R, 4.0 * R};
  AssumptionReport last;
  for (double M : candidates) {
    const auto count = static_cast<std::size_t>(std::ceil(4.0 * M / step)) + 1;
    std::vector<Grid1D> probe(spec.dim(), Grid1D(-2.0 * M, 2.0 * M, count));
    last = validate_assumption(spec, M, alpha, probe);
    if (last.passed) return last;
  }
  return last;
}

}  // namespace ehedge
