#pragma once

// European payoff catalog and a grid-based checker for the regularity
// assumption (bounded, C^2 outside a ball with Hessian <= (1 - alpha) I).

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "entropic_hedge/core.hpp"

namespace ehedge {

class PayoffSpec;

/// (K - sum a_i |x_i|)^+
struct Put {
  double K;
  std::vector<double> a;
};

/// min(K1, (sum a_i |x_i| - K2)^+)
struct TruncatedCall {
  double K1;
  double K2;
  std::vector<double> a;
};

/// inner(x) * 1{|x| < K}
struct Barrier {
  std::shared_ptr<const PayoffSpec> inner;
  double K;
};

/// c0 + <c, x> + base(x). Only `base` is subject to the regularity assumption.
struct LinearAdjusted {
  double c0;
  std::vector<double> c;
  std::shared_ptr<const PayoffSpec> base;
};

/// Multilinear interpolation of nodal values (d <= 2), constant outside the grid.
/// Values are row-major with the last axis fastest.
struct Sampled {
  std::vector<Grid1D> axes;
  std::vector<double> values;
  bool declared_bounded = false;
};

class PayoffSpec {
 public:
  using Variant = std::variant<Put, TruncatedCall, Barrier, LinearAdjusted, Sampled>;

  static PayoffSpec put(double K, std::vector<double> a);
  static PayoffSpec truncated_call(double K1, double K2, std::vector<double> a);
  static PayoffSpec barrier(PayoffSpec inner, double K);
  static PayoffSpec linear_adjusted(double c0, std::vector<double> c, PayoffSpec base);
  static PayoffSpec sampled(std::vector<Grid1D> axes, std::vector<double> values, bool declared_bounded);

  std::size_t dim() const { return dim_; }
  const Variant& variant() const { return variant_; }

 private:
  PayoffSpec(Variant v, std::size_t dim) : variant_(std::move(v)), dim_(dim) {}
  Variant variant_;
  std::size_t dim_;
};

/// Constant c in dimension d, written as linear_adjusted(c, 0, put(K = 0)).
PayoffSpec constant_payoff(double c, std::size_t d);

/// Throws std::invalid_argument on dimension mismatch.
double eval_payoff(const PayoffSpec& spec, std::span<const double> x);
inline double eval_payoff(const PayoffSpec& spec, double x) { return eval_payoff(spec, std::span<const double>(&x, 1)); }

/// sup |f| when known analytically (for linear_adjusted: of the base part).
/// std::nullopt for a sampled payoff without a boundedness declaration.
std::optional<double> payoff_bound(const PayoffSpec& spec);

/// Lipschitz bound of the base part (Euclidean norm).
double payoff_lipschitz(const PayoffSpec& spec);

/// Signed functions whose zero sets contain the non-smooth points of the payoff.
std::vector<double> kink_functions(const PayoffSpec& spec, std::span<const double> x);

/// Scale of the non-smooth region (largest kink radius).
double characteristic_radius(const PayoffSpec& spec);

/// f(x) = c0 + c1 * x on (lo, hi); lo and hi may be infinite.
struct LinearPiece {
  double lo, hi, c0, c1;
};

/// Exact decomposition of a one-dimensional payoff into affine pieces covering the line.
std::vector<LinearPiece> linear_pieces_1d(const PayoffSpec& spec);

/// Bounding box of sampled components, if any.
std::optional<std::vector<Grid1D>> sampled_domain(const PayoffSpec& spec);

enum class ViolationKind { hessian, bound, gradient, unbounded };
std::string to_string(ViolationKind kind);

struct Violation {
  std::vector<double> location;
  ViolationKind kind;
  double value;
};

struct AssumptionReport {
  double M = 0.0;
  double alpha = 0.0;
  double bound_sup = 0.0;
  std::vector<Violation> violations;
  bool passed = false;
  std::size_t probed_nodes = 0;
};

/// Tolerance added to (1 - alpha) in the Hessian probe.
inline constexpr double kHessianProbeTol = 1e-6;

/// Probes every node of the tensor grid `probe` whose centred stencil lies outside B_M.
/// Nodes whose stencil straddles a kink are skipped (one grid step guard band).
AssumptionReport validate_assumption(const PayoffSpec& spec, double M, double alpha,
                                     std::span<const Grid1D> probe);

/// Tries M in {R + 1, 2R, 4R} (sorted, R = characteristic_radius) on probe grids
/// covering [-2M, 2M]^d with spacing `step`; returns the first passing report, or the
/// last failing one.
AssumptionReport find_assumption_radius(const PayoffSpec& spec, double alpha, double step);

}  // namespace ehedge
