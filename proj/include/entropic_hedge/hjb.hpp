#pragma once

// Backward solve of  du/dt = 1/2 log det(I - D^2 u),  u(1, .) = h  on a uniform grid,
// with feedback-control extraction and gradient lookup.

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "entropic_hedge/core.hpp"
#include "entropic_hedge/envelope.hpp"

namespace ehedge {

enum class BoundaryMode {
  curvature_copy,  // D^2 u at an end node equals the adjacent interior value
  zero_curvature,  // D^2 u = 0 at end nodes (u moves linearly there)
};

/// Solution snapshots u(t_s, .) at t_s = s / (snapshots), s = 0..snapshots.
struct ValueSurface {
  std::vector<Grid1D> axes;
  std::size_t snapshots = 0;
  std::vector<double> values;  // [snapshot][node], nodes row-major with the last axis fastest
  double alpha = 1.0;          // terminal curvature margin
  double alpha_prime = 1.0;    // 1 - max D^2 u seen over the whole march
  double C = 0.0;
  double residual_max = 0.0;
  std::size_t march_steps = 0;
  std::size_t clamp_count = 0;
  bool clamp_warning = false;

  std::size_t dim() const { return axes.size(); }
  std::size_t nodes() const;
  double time(std::size_t s) const { return static_cast<double>(s) / static_cast<double>(snapshots); }
  std::span<const double> slice(std::size_t s) const;
  std::span<double> slice(std::size_t s);
  /// Piecewise-linear in t, multilinear in x (clamped).
  double value_at(double t, std::span<const double> x) const;
  double value_at(double t, double x) const { return value_at(t, std::span<const double>(&x, 1)); }
};

inline constexpr double kCflSafety = 0.9;

/// Smallest multiple of `snapshots` with 1/n_t <= safety * alpha * dx^2 / 2.
std::size_t required_time_steps(double alpha, double dx, std::size_t snapshots, double safety = kCflSafety);

/// Explicit monotone march in tau = 1 - t with D^2 u clamped at 1 - alpha/2.
/// n_t must be a multiple of `snapshots` and satisfy the CFL bound above
/// (std::invalid_argument otherwise, naming the required n_t).
ValueSurface solve_cauchy_1d(const SmoothTerminal& h, std::size_t n_t, BoundaryMode bc = BoundaryMode::curvature_copy,
                             std::size_t snapshots = 1024);

/// a x^2/2 + b x + c - ((1 - t)/2) log(1 - a). Throws std::domain_error for a >= 1.
double solve_quadratic_oracle(double a, double b, double c, double t, double x);

/// Surface filled with the closed-form quadratic solution.
ValueSurface quadratic_surface(double a, double b, double c, const Grid1D& grid, std::size_t snapshots);

/// u(t, (x, y)) = u1(t, x) + u2(t, y).
ValueSurface compose_separable(const ValueSurface& u1, const ValueSurface& u2);

/// max over interior nodes and snapshots s >= 1 of
/// |(u_s - u_{s-1}) / dt - 1/2 log det(I - D^2 u_s)|.
double pde_residual(const ValueSurface& u);
/// Signed residual at every interior node of snapshot s (boundary entries are 0).
std::vector<double> pde_residual_field(const ValueSurface& u, std::size_t s);

/// Discrete Hessian entries at every node of snapshot s: 1D {uxx}, 2D {uxx, uxy, uyy}.
/// End nodes copy the nearest interior value.
std::vector<double> hessian_field(const ValueSurface& u, std::size_t s);

struct ControlField {
  std::vector<Grid1D> axes;
  std::size_t snapshots = 0;
  std::vector<double> entries;  // per snapshot and node: 1D {s}, 2D {s11, s12, s22}
  double alpha = 1.0;
  double C = 0.0;

  std::size_t dim() const { return axes.size(); }
  std::size_t stride() const { return dim() == 1 ? 1 : 3; }
  /// Interpolated control at (t, x), clamped to the grid.
  SpdMatrix at(double t, std::span<const double> x) const;
  /// Scalar shortcut for d = 1.
  double at(double t, double x) const;
};

/// Sigma* = (I - D^2 u)^{-1} at every node and snapshot. Throws std::logic_error if
/// I - D^2 u is not positive definite somewhere.
ControlField extract_control(const ValueSurface& u);

struct ControlBounds {
  double min_eigen;
  double max_eigen;
  double lower_limit;  // 1 / (1 + 2C)
  double upper_limit;  // max(C, 2/alpha) / 2
  bool within(double tol) const { return min_eigen >= lower_limit - tol && max_eigen <= upper_limit + tol; }
};
ControlBounds control_bounds(const ControlField& field);

struct Gradient {
  std::vector<double> value;
  bool clamped;
};
/// Centered first differences (one-sided at end nodes), interpolated linearly in t and x.
Gradient gradient_at(const ValueSurface& u, double t, std::span<const double> x);

/// Gradient table of a 1D surface: [snapshot][node].
std::vector<double> gradient_table_1d(const ValueSurface& u);

void save_surface(std::ostream& os, const ValueSurface& u);
/// Throws std::runtime_error on malformed input or violated invariants.
ValueSurface load_surface(std::istream& is);

}  // namespace ehedge
