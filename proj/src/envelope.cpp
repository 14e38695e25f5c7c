#include "entropic_hedge/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hull.hpp"

namespace ehedge {

SampledFunction::SampledFunction(std::vector<Grid1D> axes_in, std::vector<double> values_in)
    : axes(std::move(axes_in)), values(std::move(values_in)) {
  if (axes.empty() || axes.size() > 2) throw std::invalid_argument("SampledFunction: 1 or 2 axes supported");
  std::size_t n = 1;
  for (const auto& g : axes) n *= g.count();
  if (values.size() != n) throw std::invalid_argument("SampledFunction: value count does not match grid");
}

double SampledFunction::at(std::span<const double> x) const {
  if (x.size() != dim()) throw std::invalid_argument("SampledFunction::at: dimension mismatch");
  if (dim() == 1) return interpolate(axes[0], values, x[0]);
  const auto cx = axes[0].locate(x[0]);
  const auto cy = axes[1].locate(x[1]);
  const std::size_t ny = axes[1].count();
  const auto v = [&](std::size_t i, std::size_t j) { return values[i * ny + j]; };
  const double a = v(cx.index, cy.index) + cy.weight * (v(cx.index, cy.index + 1) - v(cx.index, cy.index));
  const double b = v(cx.index + 1, cy.index) + cy.weight * (v(cx.index + 1, cy.index + 1) - v(cx.index + 1, cy.index));
  return a + cx.weight * (b - a);
}

std::vector<double> SampledFunction::point(std::size_t k) const {
  if (dim() == 1) return {axes[0].node(k)};
  const std::size_t ny = axes[1].count();
  return {axes[0].node(k / ny), axes[1].node(k % ny)};
}

SampledFunction sample(const PayoffSpec& f, std::vector<Grid1D> axes) {
  if (axes.size() != f.dim()) throw std::invalid_argument("sample: grid dimension does not match payoff");
  std::size_t n = 1;
  for (const auto& g : axes) n *= g.count();
  SampledFunction out(std::move(axes), std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) out.values[k] = eval_payoff(f, out.point(k));
  return out;
}

CurvatureRange discrete_curvature(const SampledFunction& g) {
  CurvatureRange r{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  bool any = false;
  if (g.dim() == 1) {
    const double h2 = g.axes[0].step() * g.axes[0].step();
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
      const double d2 = (g.values[i + 1] - 2.0 * g.values[i] + g.values[i - 1]) / h2;
      r.top = std::max(r.top, d2);
      r.bottom = std::min(r.bottom, d2);
      any = true;
    }
  } else {
    const std::size_t nx = g.axes[0].count();
    const std::size_t ny = g.axes[1].count();
    const double hx = g.axes[0].step();
    const double hy = g.axes[1].step();
    const auto v = [&](std::size_t i, std::size_t j) { return g.values[i * ny + j]; };
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      for (std::size_t j = 1; j + 1 < ny; ++j) {
        const double fxx = (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / (hx * hx);
        const double fyy = (v(i, j + 1) - 2.0 * v(i, j) + v(i, j - 1)) / (hy * hy);
        const double fxy = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * hx * hy);
        const double mid = 0.5 * (fxx + fyy);
        const double rad = std::hypot(0.5 * (fxx - fyy), fxy);
        r.top = std::max(r.top, mid + rad);
        r.bottom = std::min(r.bottom, mid - rad);
        any = true;
      }
    }
  }
  if (!any) return {0.0, 0.0};
  return r;
}

SampledFunction concave_envelope(const SampledFunction& g) {
  if (g.dim() == 0 || g.dim() > 2) throw std::invalid_argument("concave_envelope: d must be 1 or 2");
  double scale = 1.0;
  for (double v : g.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("concave_envelope: non-finite value");
    scale = std::max(scale, std::abs(v));
  }
  std::vector<double> env = g.dim() == 1 ? detail::upper_hull_1d(g.axes[0], g.values)
                                         : detail::upper_hull_2d(g.axes[0], g.axes[1], g.values);
  const double snap = 1e-13 * scale;
  for (std::size_t k = 0; k < env.size(); ++k) {
    if (env[k] <= g.values[k] + snap) env[k] = g.values[k];
  }
  return SampledFunction(g.axes, std::move(env));
}

SampledFunction shifted_envelope(const PayoffSpec& f, std::vector<Grid1D> axes, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("shifted_envelope: beta must lie in (0, 1]");
  SampledFunction g = sample(f, std::move(axes));
  std::vector<double> quad(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    double r2 = 0.0;
    for (double c : g.point(k)) r2 += c * c;
    quad[k] = 0.5 * beta * r2;
    g.values[k] -= quad[k];
  }
  SampledFunction env = concave_envelope(g);
  for (std::size_t k = 0; k < env.size(); ++k) env.values[k] += quad[k];
  return env;
}

namespace {

// Quadratic continuation data at one end of a grid line.
struct EndFit {
  double slope;
  double curv;
};

EndFit fit_end(double v0, double v1, double v2, double h, bool have_three, bool right) {
  // v0 is the end node, v1 and v2 step inward.
  const double secant = right ? (v0 - v1) / h : (v1 - v0) / h;
  const double curv = have_three ? std::min((v0 - 2.0 * v1 + v2) / (h * h), 1.0) : 0.0;
  return {right ? secant + 0.5 * curv * h : secant - 0.5 * curv * h, curv};
}

struct LineFit {
  EndFit lo;
  EndFit hi;
};

LineFit fit_line(const Grid1D& g, const std::function<double(std::size_t)>& v) {
  const std::size_t n = g.count();
  const bool three = n >= 3;
  const double h = g.step();
  LineFit f;
  f.lo = fit_end(v(0), v(1), three ? v(2) : 0.0, h, three, false);
  f.hi = fit_end(v(n - 1), v(n - 2), three ? v(n - 3) : 0.0, h, three, true);
  return f;
}

double continuation(const Grid1D& g, const LineFit& fit, double x) {
  if (x < g.lo()) {
    const double s = x - g.lo();
    return fit.lo.slope * s + 0.5 * fit.lo.curv * s * s;
  }
  if (x > g.hi()) {
    const double s = x - g.hi();
    return fit.hi.slope * s + 0.5 * fit.hi.curv * s * s;
  }
  return 0.0;
}

class Extension {
 public:
  explicit Extension(const SampledFunction& g) : g_(g) {
    if (g.dim() == 1) {
      x_fits_.push_back(fit_line(g.axes[0], [&](std::size_t i) { return g.values[i]; }));
      return;
    }
    const std::size_t nx = g.axes[0].count();
    const std::size_t ny = g.axes[1].count();
    for (std::size_t j = 0; j < ny; ++j) {
      x_fits_.push_back(fit_line(g.axes[0], [&](std::size_t i) { return g.values[i * ny + j]; }));
    }
    for (std::size_t i = 0; i < nx; ++i) {
      y_fits_.push_back(fit_line(g.axes[1], [&](std::size_t j) { return g.values[i * ny + j]; }));
    }
  }

  double operator()(std::span<const double> x) const {
    if (g_.dim() == 1 || x.size() < 2) return g_.at(x) + continuation(g_.axes[0], x_fits_[0], x[0]);
    const Grid1D& gx = g_.axes[0];
    const Grid1D& gy = g_.axes[1];
    const double xc = std::clamp(x[0], gx.lo(), gx.hi());
    const double yc = std::clamp(x[1], gy.lo(), gy.hi());
    const double c[2] = {xc, yc};
    double v = g_.at(c);
    if (x[0] != xc) v += blended(gx, gy, x_fits_, yc, x[0]);
    if (x[1] != yc) v += blended(gy, gx, y_fits_, xc, x[1]);
    return v;
  }

 private:
  static double blended(const Grid1D& along, const Grid1D& across, const std::vector<LineFit>& fits, double at,
                        double x) {
    const auto cell = across.locate(at);
    const double a = continuation(along, fits[cell.index], x);
    const double b = continuation(along, fits[cell.index + 1], x);
    return a + cell.weight * (b - a);
  }

  const SampledFunction& g_;
  std::vector<LineFit> x_fits_;
  std::vector<LineFit> y_fits_;
};

}  // namespace

double extended_value(const SampledFunction& g, std::span<const double> x) { return Extension(g)(x); }

SampledFunction mollify(const SampledFunction& hhat, double delta, const QuadRule& rule) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("mollify: delta must be > 0");
  if (rule.order() < 16) throw std::invalid_argument("mollify: quadrature order must be >= 16");
  for (const auto& g : hhat.axes) {
    if (g.hi() - g.lo() < 12.0 * delta) {
      std::ostringstream msg;
      msg << "mollify: grid extent " << (g.hi() - g.lo()) << " is below the required padding of 6*delta = "
          << 6.0 * delta << " on each side";
      throw std::invalid_argument(msg.str());
    }
  }
  const Extension ext(hhat);
  SampledFunction out(hhat.axes, std::vector<double>(hhat.size()));
  const std::size_t m = rule.order();
  if (hhat.dim() == 1) {
    parallel_for(hhat.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const double x = hhat.axes[0].node(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          const double p = x + delta * rule.nodes[k];
          acc += rule.weights[k] * ext(std::span<const double>(&p, 1));
        }
        out.values[i] = acc;
      }
    });
    return out;
  }
  parallel_for(hhat.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto x = hhat.point(k);
      double acc = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < m; ++b) {
          const double p[2] = {x[0] + delta * rule.nodes[a], x[1] + delta * rule.nodes[b]};
          row += rule.weights[b] * ext(p);
        }
        acc += rule.weights[a] * row;
      }
      out.values[k] = acc;
    }
  });
  return out;
}

SmoothTerminal make_terminal(SampledFunction h, double delta, double epsilon) {
  for (double v : h.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("make_terminal: non-finite value");
  }
  const auto curv = discrete_curvature(h);
  SmoothTerminal t;
  t.alpha = std::min(1.0, 1.0 - curv.top);
  if (!(t.alpha > 0.0)) {
    std::ostringstream msg;
    msg << "make_terminal: discrete Hessian reaches " << curv.top << ", no positive curvature margin";
    throw std::domain_error(msg.str());
  }
  t.C = std::max(0.0, -0.5 * curv.bottom);
  t.h = std::move(h);
  t.delta = delta;
  t.epsilon = epsilon;
  t.epsilon_target = epsilon;
  return t;
}

SmoothTerminal build_terminal(const PayoffSpec& f, double epsilon, std::vector<Grid1D> axes, int rule_order) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("build_terminal: epsilon must be > 0");
  if (axes.size() != f.dim()) throw std::invalid_argument("build_terminal: grid dimension does not match payoff");
  if (const auto* la = std::get_if<LinearAdjusted>(&f.variant())) {
    SmoothTerminal t = build_terminal(*la->base, epsilon, std::move(axes), rule_order);
    for (std::size_t k = 0; k < t.h.size(); ++k) {
      const auto x = t.h.point(k);
      double lin = la->c0;
      for (std::size_t i = 0; i < x.size(); ++i) lin += la->c[i] * x[i];
      t.h.values[k] += lin;
    }
    return t;
  }

  const QuadRule rule = gauss_hermite(rule_order);
  const SampledFunction reference = shifted_envelope(f, axes, 1.0);
  double extent = std::numeric_limits<double>::infinity();
  for (const auto& g : axes) extent = std::min(extent, g.hi() - g.lo());

  constexpr int kMargins = 6;
  std::vector<SampledFunction> shifted;
  for (int j = 1; j <= kMargins; ++j) shifted.push_back(shifted_envelope(f, axes, 1.0 - std::ldexp(1.0, -j)));

  double best = std::numeric_limits<double>::infinity();
  for (int e = 1; e <= 12; ++e) {
    const double delta = std::ldexp(1.0, -e);
    if (12.0 * delta > extent) continue;
    for (int j = 1; j <= kMargins; ++j) {
      SampledFunction h = mollify(shifted[j - 1], delta, rule);
      double dist = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) dist = std::max(dist, std::abs(h.values[k] - reference.values[k]));
      best = std::min(best, dist);
      if (!(dist < epsilon)) continue;
      const auto curv = discrete_curvature(h);
      const double alpha = std::min(1.0, 1.0 - curv.top);
      if (!(alpha > 0.0)) continue;
      SmoothTerminal t;
      t.h = std::move(h);
      t.delta = delta;
      t.epsilon = dist;
      t.epsilon_target = epsilon;
      t.margin = std::ldexp(1.0, -j);
      t.alpha = alpha;
      t.C = std::max(0.0, -0.5 * curv.bottom);
      return t;
    }
  }
  std::ostringstream msg;
  msg << "build_terminal: no smoothing width down to 2^-12 reaches epsilon = " << epsilon
      << " (best sup distance " << best << ")";
  throw std::runtime_error(msg.str());
}

namespace {
constexpr const char* kTerminalMagic = "entropic-hedge-terminal";
constexpr int kTerminalVersion = 1;

template <typename T>
T read_field(std::istream& is, const std::string& name) {
  std::string key;
  T value{};
  if (!(is >> key) || key != name || !(is >> value)) {
    throw std::runtime_error("load_terminal: expected field '" + name + "'");
  }
  return value;
}
}  // namespace

void save_terminal(std::ostream& os, const SmoothTerminal& t) {
  os << std::setprecision(17);
  os << kTerminalMagic << ' ' << kTerminalVersion << '\n';
  os << "dim " << t.h.dim() << '\n';
  for (const auto& g : t.h.axes) os << "axis " << g.lo() << ' ' << g.hi() << ' ' << g.count() << '\n';
  os << "delta " << t.delta << '\n';
  os << "epsilon " << t.epsilon << '\n';
  os << "epsilon_target " << t.epsilon_target << '\n';
  os << "margin " << t.margin << '\n';
  os << "alpha " << t.alpha << '\n';
  os << "C " << t.C << '\n';
  os << "values " << t.h.size() << '\n';
  for (double v : t.h.values) os << v << '\n';
}

SmoothTerminal load_terminal(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kTerminalMagic) throw std::runtime_error("load_terminal: bad header");
  if (version != kTerminalVersion) {
    throw std::runtime_error("load_terminal: unsupported version " + std::to_string(version));
  }
  const auto dim = read_field<std::size_t>(is, "dim");
  if (dim < 1 || dim > 2) throw std::runtime_error("load_terminal: dim must be 1 or 2");
  std::vector<Grid1D> axes;
  for (std::size_t a = 0; a < dim; ++a) {
    std::string key;
    double lo, hi;
    std::size_t count;
    if (!(is >> key >> lo >> hi >> count) || key != "axis") throw std::runtime_error("load_terminal: bad axis line");
    axes.emplace_back(lo, hi, count);
  }
  SmoothTerminal t;
  t.delta = read_field<double>(is, "delta");
  t.epsilon = read_field<double>(is, "epsilon");
  t.epsilon_target = read_field<double>(is, "epsilon_target");
  t.margin = read_field<double>(is, "margin");
  t.alpha = read_field<double>(is, "alpha");
  t.C = read_field<double>(is, "C");
  const auto n = read_field<std::size_t>(is, "values");
  std::vector<double> values(n);
  for (auto& v : values) {
    if (!(is >> v) || !std::isfinite(v)) throw std::runtime_error("load_terminal: truncated or non-finite values");
  }
  t.h = SampledFunction(std::move(axes), std::move(values));
  if (!(t.alpha > 0.0 && t.alpha <= 1.0) || !(t.C >= 0.0)) throw std::runtime_error("load_terminal: bad alpha or C");
  const auto curv = discrete_curvature(t.h);
  if (curv.top > 1.0 - t.alpha + 1e-9 || curv.bottom < -2.0 * t.C - 1e-9) {
    throw std::runtime_error("load_terminal: values violate the recorded curvature bounds");
  }
  return t;
}

}  // namespace ehedge
