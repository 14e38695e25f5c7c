#pragma once

// Terminal smoothing: concave envelopes of gridded data, the shifted envelope
// |x|^2/2 + (f - |x|^2/2)^cav, Gaussian mollification, and the class-H terminal
// builder with certified curvature constants.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "entropic_hedge/core.hpp"
#include "entropic_hedge/payoffs.hpp"

namespace ehedge {

/// Nodal values on a tensor grid (d <= 2), row-major with the last axis fastest.
struct SampledFunction {
  std::vector<Grid1D> axes;
  std::vector<double> values;

  SampledFunction() = default;
  SampledFunction(std::vector<Grid1D> axes, std::vector<double> values);

  std::size_t dim() const { return axes.size(); }
  std::size_t size() const { return values.size(); }
  /// Multilinear interpolation, clamped to the grid.
  double at(std::span<const double> x) const;
  double at(double x) const { return at(std::span<const double>(&x, 1)); }
  /// Coordinates of flat node index k.
  std::vector<double> point(std::size_t k) const;
};

/// Samples f on the tensor grid.
SampledFunction sample(const PayoffSpec& f, std::vector<Grid1D> axes);

struct CurvatureRange {
  double top = 0.0;     // max over interior nodes of the largest Hessian eigenvalue
  double bottom = 0.0;  // min over interior nodes of the smallest Hessian eigenvalue
};

/// Centered second differences at interior nodes (cross term by the 4-point stencil).
CurvatureRange discrete_curvature(const SampledFunction& g);

/// Smallest concave function >= g, restricted to the grid nodes.
/// 1D: monotone chain. 2D: upper facets of the lifted convex hull.
SampledFunction concave_envelope(const SampledFunction& g);

/// beta |x|^2/2 + (f - beta |x|^2/2)^cav on the grid; beta = 1 is the plain shifted envelope.
SampledFunction shifted_envelope(const PayoffSpec& f, std::vector<Grid1D> axes, double beta = 1.0);

/// Gaussian smoothing h(x) = E[hhat(x + delta Z)] on the nodes of hhat.
/// hhat is interpolated linearly inside the grid and continued quadratically outside
/// (boundary slope, boundary curvature capped at 1).
SampledFunction mollify(const SampledFunction& hhat, double delta, const QuadRule& rule);

/// Value of the extension used by mollify at an arbitrary point.
double extended_value(const SampledFunction& g, std::span<const double> x);

struct SmoothTerminal {
  SampledFunction h;
  double delta = 0.0;
  double epsilon = 0.0;         // achieved sup-node distance to the shifted envelope
  double epsilon_target = 0.0;  // requested tolerance
  double margin = 0.0;          // 1 - beta of the margin-shifted envelope that was smoothed
  double alpha = 1.0;
  double C = 0.0;
};

/// Wraps an arbitrary gridded terminal, certifying alpha and C from its discrete Hessian.
/// Throws std::domain_error when the certified alpha is not positive.
SmoothTerminal make_terminal(SampledFunction h, double delta, double epsilon);

/// Ladder search: delta = 2^-1, 2^-2, ..., 2^-12; for each delta the margins
/// 2^-1, ..., 2^-6 are tried in turn. The first pair whose smoothed terminal lies
/// within epsilon of the shifted envelope (and has alpha > 0) is returned.
/// linear_adjusted payoffs are handled by building the base and adding the affine part.
SmoothTerminal build_terminal(const PayoffSpec& f, double epsilon, std::vector<Grid1D> axes, int rule_order = 32);

void save_terminal(std::ostream& os, const SmoothTerminal& t);
/// Throws std::runtime_error on malformed input or violated invariants.
SmoothTerminal load_terminal(std::istream& is);

}  // namespace ehedge
