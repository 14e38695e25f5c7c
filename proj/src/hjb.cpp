#include "entropic_hedge/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ehedge {

std::size_t ValueSurface::nodes() const {
  std::size_t n = 1;
  for (const auto& g : axes) n *= g.count();
  return n;
}

std::span<const double> ValueSurface::slice(std::size_t s) const {
  return std::span<const double>(values).subspan(s * nodes(), nodes());
}

std::span<double> ValueSurface::slice(std::size_t s) { return std::span<double>(values).subspan(s * nodes(), nodes()); }

namespace {

struct TimeCell {
  std::size_t s;
  double w;  // weight of snapshot s + 1
};

TimeCell locate_time(std::size_t snapshots, double t) {
  const double pos = std::clamp(t, 0.0, 1.0) * static_cast<double>(snapshots);
  const double r = std::round(pos);
  if (std::abs(pos - r) < 1e-9) {
    const auto s = static_cast<std::size_t>(r);
    if (s == snapshots) return {s - 1, 1.0};
    return {s, 0.0};
  }
  auto s = static_cast<std::size_t>(pos);
  if (s >= snapshots) s = snapshots - 1;
  return {s, pos - static_cast<double>(s)};
}

double interp_nodes(const std::vector<Grid1D>& axes, std::span<const double> v, std::span<const double> x,
                    std::size_t stride = 1, std::size_t offset = 0) {
  if (axes.size() == 1) {
    const auto c = axes[0].locate(x[0]);
    const double a = v[c.index * stride + offset];
    const double b = v[(c.index + 1) * stride + offset];
    return a + c.weight * (b - a);
  }
  const std::size_t ny = axes[1].count();
  const auto cx = axes[0].locate(x[0]);
  const auto cy = axes[1].locate(x[1]);
  const auto at = [&](std::size_t i, std::size_t j) { return v[(i * ny + j) * stride + offset]; };
  const double a = at(cx.index, cy.index) + cy.weight * (at(cx.index, cy.index + 1) - at(cx.index, cy.index));
  const double b =
      at(cx.index + 1, cy.index) + cy.weight * (at(cx.index + 1, cy.index + 1) - at(cx.index + 1, cy.index));
  return a + cx.weight * (b - a);
}

double log_det_gap(std::span<const double> hess, std::size_t k, std::size_t dim) {
  if (dim == 1) return std::log(1.0 - hess[k]);
  const double a = 1.0 - hess[3 * k];
  const double b = -hess[3 * k + 1];
  const double c = 1.0 - hess[3 * k + 2];
  return std::log(a * c - b * b);
}

void require_grid(const ValueSurface& u) {
  for (const auto& g : u.axes) {
    if (g.count() < 3) throw std::invalid_argument("surface axes need at least 3 nodes");
  }
}

}  // namespace

double ValueSurface::value_at(double t, std::span<const double> x) const {
  if (x.size() != dim()) throw std::invalid_argument("ValueSurface::value_at: dimension mismatch");
  const auto tc = locate_time(snapshots, t);
  const double a = interp_nodes(axes, slice(tc.s), x);
  if (tc.w == 0.0) return a;
  const double b = interp_nodes(axes, slice(tc.s + 1), x);
  return a + tc.w * (b - a);
}

std::size_t required_time_steps(double alpha, double dx, std::size_t snapshots, double safety) {
  if (!(alpha > 0.0) || !(dx > 0.0) || snapshots == 0) {
    throw std::invalid_argument("required_time_steps: need alpha > 0, dx > 0, snapshots > 0");
  }
  const double max_dt = safety * alpha * dx * dx / 2.0;
  auto n = static_cast<std::size_t>(std::ceil(1.0 / max_dt - 1e-9));
  n = std::max<std::size_t>(n, 1);
  return (n + snapshots - 1) / snapshots * snapshots;
}

ValueSurface solve_cauchy_1d(const SmoothTerminal& h, std::size_t n_t, BoundaryMode bc, std::size_t snapshots) {
  if (h.h.dim() != 1) throw std::invalid_argument("solve_cauchy_1d: terminal must be one-dimensional");
  if (!(h.alpha > 0.0)) throw std::invalid_argument("solve_cauchy_1d: terminal alpha must be > 0");
  if (snapshots == 0 || n_t == 0 || n_t % snapshots != 0) {
    throw std::invalid_argument("solve_cauchy_1d: n_t must be a positive multiple of the snapshot count");
  }
  const Grid1D& grid = h.h.axes[0];
  const std::size_t N = grid.count();
  if (N < 3) throw std::invalid_argument("solve_cauchy_1d: grid needs at least 3 nodes");
  const double dx = grid.step();
  const double dtau = 1.0 / static_cast<double>(n_t);
  if (dtau > kCflSafety * h.alpha * dx * dx / 2.0 * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "solve_cauchy_1d: CFL violated, n_t = " << n_t << " but at least "
        << required_time_steps(h.alpha, dx, snapshots) << " steps are required";
    throw std::invalid_argument(msg.str());
  }

  ValueSurface out;
  out.axes = {grid};
  out.snapshots = snapshots;
  out.values.assign((snapshots + 1) * N, 0.0);
  out.alpha = h.alpha;
  out.C = h.C;
  out.march_steps = n_t;

  const double cap = 1.0 - h.alpha / 2.0;
  const double inv_dx2 = 1.0 / (dx * dx);
  std::vector<double> u(h.h.values);
  std::vector<double> rate(N);
  std::vector<double> prev_rate(N);
  double top = -std::numeric_limits<double>::infinity();
  std::size_t clamps = 0;

  const auto compute_rate = [&](const std::vector<double>& v, std::vector<double>& r) {
    for (std::size_t i = 1; i + 1 < N; ++i) {
      double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dx2;
      top = std::max(top, d2);
      if (d2 > cap) {
        d2 = cap;
        ++clamps;
      }
      r[i] = -0.5 * std::log(1.0 - d2);
    }
    if (bc == BoundaryMode::curvature_copy) {
      r[0] = r[1];
      r[N - 1] = r[N - 2];
    } else {
      r[0] = 0.0;
      r[N - 1] = 0.0;
    }
  };

  const std::size_t stride = n_t / snapshots;
  std::copy(u.begin(), u.end(), out.slice(snapshots).begin());
  compute_rate(u, rate);
  double residual = 0.0;
  for (std::size_t step = 1; step <= n_t; ++step) {
    for (std::size_t i = 0; i < N; ++i) u[i] += dtau * rate[i];
    std::swap(rate, prev_rate);
    compute_rate(u, rate);
    for (std::size_t i = 1; i + 1 < N; ++i) residual = std::max(residual, std::abs(prev_rate[i] - rate[i]));
    if (step % stride == 0) {
      const std::size_t s = snapshots - step / stride;
      std::copy(u.begin(), u.end(), out.slice(s).begin());
    }
  }
  out.residual_max = residual;
  out.alpha_prime = 1.0 - top;
  out.clamp_count = clamps;
  const double updates = static_cast<double>(n_t + 1) * static_cast<double>(N - 2);
  out.clamp_warning = static_cast<double>(clamps) > 1e-3 * updates;
  return out;
}

double solve_quadratic_oracle(double a, double b, double c, double t, double x) {
  if (!(a < 1.0)) throw std::domain_error("solve_quadratic_oracle: a must be < 1");
  return 0.5 * a * x * x + b * x + c - 0.5 * (1.0 - t) * std::log(1.0 - a);
}

ValueSurface quadratic_surface(double a, double b, double c, const Grid1D& grid, std::size_t snapshots) {
  if (snapshots == 0) throw std::invalid_argument("quadratic_surface: snapshots must be > 0");
  ValueSurface out;
  out.axes = {grid};
  out.snapshots = snapshots;
  out.values.resize((snapshots + 1) * grid.count());
  for (std::size_t s = 0; s <= snapshots; ++s) {
    auto sl = out.slice(s);
    for (std::size_t i = 0; i < grid.count(); ++i) sl[i] = solve_quadratic_oracle(a, b, c, out.time(s), grid.node(i));
  }
  out.alpha = a > 0.0 ? 1.0 - a : 1.0;
  out.alpha_prime = out.alpha;
  out.C = std::max(0.0, -0.5 * a);
  return out;
}

ValueSurface compose_separable(const ValueSurface& u1, const ValueSurface& u2) {
  if (u1.dim() != 1 || u2.dim() != 1) throw std::invalid_argument("compose_separable: inputs must be 1D surfaces");
  if (u1.snapshots != u2.snapshots) throw std::invalid_argument("compose_separable: time grids differ");
  ValueSurface out;
  out.axes = {u1.axes[0], u2.axes[0]};
  out.snapshots = u1.snapshots;
  const std::size_t nx = u1.axes[0].count();
  const std::size_t ny = u2.axes[0].count();
  out.values.resize((out.snapshots + 1) * nx * ny);
  for (std::size_t s = 0; s <= out.snapshots; ++s) {
    const auto a = u1.slice(s);
    const auto b = u2.slice(s);
    auto o = out.slice(s);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) o[i * ny + j] = a[i] + b[j];
  }
  out.alpha = std::min(u1.alpha, u2.alpha);
  out.alpha_prime = std::min(u1.alpha_prime, u2.alpha_prime);
  out.C = std::max(u1.C, u2.C);
  out.residual_max = u1.residual_max + u2.residual_max;
  out.march_steps = std::max(u1.march_steps, u2.march_steps);
  out.clamp_count = u1.clamp_count + u2.clamp_count;
  out.clamp_warning = u1.clamp_warning || u2.clamp_warning;
  return out;
}

std::vector<double> hessian_field(const ValueSurface& u, std::size_t s) {
  require_grid(u);
  const auto v = u.slice(s);
  if (u.dim() == 1) {
    const std::size_t N = u.axes[0].count();
    const double inv = 1.0 / (u.axes[0].step() * u.axes[0].step());
    std::vector<double> out(N);
    for (std::size_t i = 1; i + 1 < N; ++i) out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv;
    out[0] = out[1];
    out[N - 1] = out[N - 2];
    return out;
  }
  const std::size_t nx = u.axes[0].count();
  const std::size_t ny = u.axes[1].count();
  const double hx = u.axes[0].step();
  const double hy = u.axes[1].step();
  const auto at = [&](std::size_t i, std::size_t j) { return v[i * ny + j]; };
  std::vector<double> out(3 * nx * ny);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t a = std::clamp<std::size_t>(i, 1, nx - 2);
      const std::size_t b = std::clamp<std::size_t>(j, 1, ny - 2);
      const std::size_t k = 3 * (i * ny + j);
      out[k] = (at(a + 1, b) - 2.0 * at(a, b) + at(a - 1, b)) / (hx * hx);
      out[k + 1] = (at(a + 1, b + 1) - at(a + 1, b - 1) - at(a - 1, b + 1) + at(a - 1, b - 1)) / (4.0 * hx * hy);
      out[k + 2] = (at(a, b + 1) - 2.0 * at(a, b) + at(a, b - 1)) / (hy * hy);
    }
  }
  return out;
}

std::vector<double> pde_residual_field(const ValueSurface& u, std::size_t s) {
  if (s == 0 || s > u.snapshots) throw std::invalid_argument("pde_residual_field: snapshot must lie in [1, snapshots]");
  const double dt = 1.0 / static_cast<double>(u.snapshots);
  const auto now = u.slice(s);
  const auto before = u.slice(s - 1);
  const auto hess = hessian_field(u, s);
  std::vector<double> out(u.nodes(), 0.0);
  const auto interior = [&](std::size_t k) {
    if (u.dim() == 1) return k > 0 && k + 1 < u.axes[0].count();
    const std::size_t ny = u.axes[1].count();
    const std::size_t i = k / ny;
    const std::size_t j = k % ny;
    return i > 0 && i + 1 < u.axes[0].count() && j > 0 && j + 1 < ny;
  };
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!interior(k)) continue;
    out[k] = (now[k] - before[k]) / dt - 0.5 * log_det_gap(hess, k, u.dim());
  }
  return out;
}

double pde_residual(const ValueSurface& u) {
  double worst = 0.0;
  for (std::size_t s = 1; s <= u.snapshots; ++s) {
    for (double r : pde_residual_field(u, s)) {
      if (std::isnan(r)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

ControlField extract_control(const ValueSurface& u) {
  ControlField field;
  field.axes = u.axes;
  field.snapshots = u.snapshots;
  field.alpha = u.alpha;
  field.C = u.C;
  const std::size_t n = u.nodes();
  field.entries.resize((u.snapshots + 1) * n * field.stride());
  for (std::size_t s = 0; s <= u.snapshots; ++s) {
    const auto hess = hessian_field(u, s);
    double* dst = field.entries.data() + s * n * field.stride();
    for (std::size_t k = 0; k < n; ++k) {
      if (u.dim() == 1) {
        const double gap = 1.0 - hess[k];
        if (!(gap > 0.0)) throw std::logic_error("extract_control: I - D^2 u is singular");
        dst[k] = 1.0 / gap;
      } else {
        const double a = 1.0 - hess[3 * k];
        const double b = -hess[3 * k + 1];
        const double c = 1.0 - hess[3 * k + 2];
        const double det = a * c - b * b;
        if (!(a > 0.0 && det > 0.0)) throw std::logic_error("extract_control: I - D^2 u is singular");
        dst[3 * k] = c / det;
        dst[3 * k + 1] = -b / det;
        dst[3 * k + 2] = a / det;
      }
    }
  }
  return field;
}

SpdMatrix ControlField::at(double t, std::span<const double> x) const {
  if (x.size() != dim()) throw std::invalid_argument("ControlField::at: dimension mismatch");
  const auto tc = locate_time(snapshots, t);
  std::size_t n = 1;
  for (const auto& g : axes) n *= g.count();
  const auto slice = [&](std::size_t s) { return std::span<const double>(entries).subspan(s * n * stride(), n * stride()); };
  const auto value = [&](std::size_t offset) {
    const double a = interp_nodes(axes, slice(tc.s), x, stride(), offset);
    if (tc.w == 0.0) return a;
    const double b = interp_nodes(axes, slice(tc.s + 1), x, stride(), offset);
    return a + tc.w * (b - a);
  };
  if (dim() == 1) return SpdMatrix::scalar(value(0));
  const double s11 = value(0);
  const double s12 = value(1);
  const double s22 = value(2);
  return SpdMatrix(2, {s11, s12, s12, s22});
}

double ControlField::at(double t, double x) const {
  if (dim() != 1) throw std::invalid_argument("ControlField::at: scalar access needs d = 1");
  const auto tc = locate_time(snapshots, t);
  const std::size_t n = axes[0].count();
  const std::span<const double> all(entries);
  const double xs[1] = {x};
  const double a = interp_nodes(axes, all.subspan(tc.s * n, n), xs);
  if (tc.w == 0.0) return a;
  const double b = interp_nodes(axes, all.subspan((tc.s + 1) * n, n), xs);
  return a + tc.w * (b - a);
}

ControlBounds control_bounds(const ControlField& field) {
  ControlBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                  1.0 / (1.0 + 2.0 * field.C), std::max(field.C, 2.0 / field.alpha) / 2.0};
  if (field.dim() == 1) {
    for (double v : field.entries) {
      b.min_eigen = std::min(b.min_eigen, v);
      b.max_eigen = std::max(b.max_eigen, v);
    }
    return b;
  }
  for (std::size_t k = 0; k + 2 < field.entries.size(); k += 3) {
    const double a = field.entries[k];
    const double off = field.entries[k + 1];
    const double c = field.entries[k + 2];
    const double mid = 0.5 * (a + c);
    const double rad = std::hypot(0.5 * (a - c), off);
    b.min_eigen = std::min(b.min_eigen, mid - rad);
    b.max_eigen = std::max(b.max_eigen, mid + rad);
  }
  return b;
}

namespace {

// Centered first differences along `axis` for one snapshot; one-sided at the ends.
std::vector<double> first_differences(const ValueSurface& u, std::size_t s, std::size_t axis) {
  const auto v = u.slice(s);
  std::vector<double> out(v.size());
  const Grid1D& g = u.axes[axis];
  const std::size_t n = g.count();
  const std::size_t stride = (u.dim() == 2 && axis == 0) ? u.axes[1].count() : 1;
  const std::size_t lines = v.size() / n;
  const double h = g.step();
  for (std::size_t line = 0; line < lines; ++line) {
    const std::size_t base = (u.dim() == 2 && axis == 0) ? line : line * n;
    const auto at = [&](std::size_t i) { return v[base + i * stride]; };
    for (std::size_t i = 0; i < n; ++i) {
      double d;
      if (i == 0) {
        d = (at(1) - at(0)) / h;
      } else if (i + 1 == n) {
        d = (at(n - 1) - at(n - 2)) / h;
      } else {
        d = (at(i + 1) - at(i - 1)) / (2.0 * h);
      }
      out[base + i * stride] = d;
    }
  }
  return out;
}

}  // namespace

Gradient gradient_at(const ValueSurface& u, double t, std::span<const double> x) {
  if (x.size() != u.dim()) throw std::invalid_argument("gradient_at: dimension mismatch");
  Gradient g{std::vector<double>(u.dim()), false};
  for (std::size_t a = 0; a < u.dim(); ++a) g.clamped = g.clamped || !u.axes[a].contains(x[a]);
  const auto tc = locate_time(u.snapshots, t);
  for (std::size_t a = 0; a < u.dim(); ++a) {
    const auto d0 = first_differences(u, tc.s, a);
    double v = interp_nodes(u.axes, d0, x);
    if (tc.w != 0.0) {
      const auto d1 = first_differences(u, tc.s + 1, a);
      v += tc.w * (interp_nodes(u.axes, d1, x) - v);
    }
    g.value[a] = v;
  }
  return g;
}

std::vector<double> gradient_table_1d(const ValueSurface& u) {
  if (u.dim() != 1) throw std::invalid_argument("gradient_table_1d: surface must be one-dimensional");
  const std::size_t n = u.nodes();
  std::vector<double> out((u.snapshots + 1) * n);
  for (std::size_t s = 0; s <= u.snapshots; ++s) {
    const auto d = first_differences(u, s, 0);
    std::copy(d.begin(), d.end(), out.begin() + static_cast<std::ptrdiff_t>(s * n));
  }
  return out;
}

namespace {
constexpr const char* kSurfaceMagic = "entropic-hedge-surface";
constexpr int kSurfaceVersion = 1;

template <typename T>
T read_field(std::istream& is, const std::string& name) {
  std::string key;
  T value{};
  if (!(is >> key) || key != name || !(is >> value)) throw std::runtime_error("load_surface: expected field '" + name + "'");
  return value;
}
}  // namespace

void save_surface(std::ostream& os, const ValueSurface& u) {
  os << std::setprecision(17);
  os << kSurfaceMagic << ' ' << kSurfaceVersion << '\n';
  os << "dim " << u.dim() << '\n';
  for (const auto& g : u.axes) os << "axis " << g.lo() << ' ' << g.hi() << ' ' << g.count() << '\n';
  os << "snapshots " << u.snapshots << '\n';
  os << "alpha " << u.alpha << '\n';
  os << "alpha_prime " << u.alpha_prime << '\n';
  os << "C " << u.C << '\n';
  os << "residual_max " << u.residual_max << '\n';
  os << "march_steps " << u.march_steps << '\n';
  os << "clamp_count " << u.clamp_count << '\n';
  os << "clamp_warning " << (u.clamp_warning ? 1 : 0) << '\n';
  os << "values " << u.values.size() << '\n';
  const std::size_t n = u.nodes();
  for (std::size_t k = 0; k < u.values.size(); ++k) os << u.values[k] << ((k + 1) % n == 0 ? '\n' : ' ');
}

ValueSurface load_surface(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kSurfaceMagic) throw std::runtime_error("load_surface: bad header");
  if (version != kSurfaceVersion) throw std::runtime_error("load_surface: unsupported version " + std::to_string(version));
  ValueSurface u;
  const auto dim = read_field<std::size_t>(is, "dim");
  if (dim < 1 || dim > 2) throw std::runtime_error("load_surface: dim must be 1 or 2");
  for (std::size_t a = 0; a < dim; ++a) {
    std::string key;
    double lo, hi;
    std::size_t count;
    if (!(is >> key >> lo >> hi >> count) || key != "axis") throw std::runtime_error("load_surface: bad axis line");
    u.axes.emplace_back(lo, hi, count);
  }
  u.snapshots = read_field<std::size_t>(is, "snapshots");
  u.alpha = read_field<double>(is, "alpha");
  u.alpha_prime = read_field<double>(is, "alpha_prime");
  u.C = read_field<double>(is, "C");
  u.residual_max = read_field<double>(is, "residual_max");
  u.march_steps = read_field<std::size_t>(is, "march_steps");
  u.clamp_count = read_field<std::size_t>(is, "clamp_count");
  u.clamp_warning = read_field<int>(is, "clamp_warning") != 0;
  const auto n = read_field<std::size_t>(is, "values");
  if (u.snapshots == 0 || n != (u.snapshots + 1) * u.nodes()) throw std::runtime_error("load_surface: value count mismatch");
  u.values.resize(n);
  for (auto& v : u.values) {
    if (!(is >> v) || !std::isfinite(v)) throw std::runtime_error("load_surface: truncated or non-finite values");
  }
  if (!(u.alpha > 0.0) || !(u.alpha_prime > 0.0) || !(u.C >= 0.0)) {
    throw std::runtime_error("load_surface: bad curvature metadata");
  }
  for (std::size_t s = 0; s <= u.snapshots; ++s) {
    const auto hess = hessian_field(u, s);
    const std::size_t stride = u.dim() == 1 ? 1 : 3;
    for (std::size_t k = 0; k < hess.size(); k += stride) {
      double top = hess[k];
      if (u.dim() == 2) top = 0.5 * (hess[k] + hess[k + 2]) + std::hypot(0.5 * (hess[k] - hess[k + 2]), hess[k + 1]);
      if (top > 1.0 - u.alpha_prime + 1e-9) throw std::runtime_error("load_surface: curvature exceeds recorded bound");
    }
  }
  return u;
}

}  // namespace ehedge
