#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entropic_hedge/dp.hpp"
#include "entropic_hedge/dual.hpp"
#include "entropic_hedge/envelope.hpp"
#include "support.hpp"

using namespace ehedge;
using testing_support::Phi;
using testing_support::phi;

namespace {

constexpr Integration kMethods[] = {Integration::gauss_hermite, Integration::piecewise_exact};

double G(double s) { return 0.5 * (s - 1.0 - std::log(s)); }

// E (1 - |s Z|)^+ for Z standard normal
double put_mean(double s) { return 2.0 * ((Phi(1.0 / s) - 0.5) - s * (phi(0.0) - phi(1.0 / s))); }

PiecewiseControl scalar_control(std::initializer_list<double> values, double K = 100.0) {
  std::vector<SpdMatrix> pieces;
  for (double v : values) pieces.push_back(SpdMatrix::scalar(v));
  return PiecewiseControl::uniform(std::move(pieces), K);
}

PayoffSpec quarter_square(const Grid1D& g) {
  std::vector<double> v(g.count());
  for (std::size_t i = 0; i < g.count(); ++i) v[i] = 0.25 * g.node(i) * g.node(i);
  return PayoffSpec::sampled({g}, v, true);
}

const SmoothTerminal& put_terminal() {
  static const SmoothTerminal t =
      build_terminal(PayoffSpec::put(1.0, {1.0}), 0.05, {Grid1D::aligned(0.0, -20.0, 20.0, 1.0 / 32.0)}, 64);
  return t;
}

const ValueSurface& put_surface() {
  static const ValueSurface u = [] {
    const auto& t = put_terminal();
    return solve_cauchy_1d(t, required_time_steps(t.alpha, t.h.axes[0].step(), 64), BoundaryMode::curvature_copy, 64);
  }();
  return u;
}

PayoffSpec surrogate() {
  const auto& t = put_terminal();
  return PayoffSpec::sampled(t.h.axes, t.h.values, true);
}

const double kOrigin[] = {0.0};

}  // namespace

TEST_CASE("specific entropy examples") {
  CHECK(specific_entropy(scalar_control({1.0})) == 0.0);
  CHECK(specific_entropy(scalar_control({2.0})) == doctest::Approx(0.153426).epsilon(1e-6));
  CHECK(specific_entropy(scalar_control({2.0, 0.5})) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(specific_entropy(scalar_control({2.0, 0.5})) == doctest::Approx(0.5 * (G(2.0) + G(0.5))).epsilon(1e-14));
  const PiecewiseControl two({0.0, 0.3, 1.0}, {SpdMatrix::scalar(2.0), SpdMatrix::scalar(0.5)}, 4.0);
  const PiecewiseControl split({0.0, 0.1, 0.3, 0.7, 1.0},
                               {SpdMatrix::scalar(2.0), SpdMatrix::scalar(2.0), SpdMatrix::scalar(0.5),
                                SpdMatrix::scalar(0.5)},
                               4.0);
  CHECK(specific_entropy(split) == doctest::Approx(specific_entropy(two)).epsilon(1e-15));
}

TEST_CASE("entropy is additive under refinement") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial % 2;
    std::vector<double> breaks{0.0};
    std::vector<SpdMatrix> pieces;
    std::vector<double> fine_breaks{0.0};
    std::vector<SpdMatrix> fine_pieces;
    const int m = 1 + trial % 4;
    for (int j = 0; j < m; ++j) {
      const double t1 = static_cast<double>(j + 1) / m;
      const auto s = testing_support::random_spd(gen, d, 0.2, 5.0);
      breaks.push_back(t1);
      pieces.push_back(s);
      fine_breaks.push_back(testing_support::unif(gen, breaks[j] + 0.1 / m, t1 - 0.1 / m));
      fine_breaks.push_back(t1);
      fine_pieces.push_back(s);
      fine_pieces.push_back(s);
    }
    const PiecewiseControl coarse(breaks, pieces, 10.0);
    const PiecewiseControl fine(fine_breaks, fine_pieces, 10.0);
    REQUIRE(std::abs(specific_entropy(fine) - specific_entropy(coarse)) <= 1e-14);
  }
}

TEST_CASE("piecewise control validation") {
  CHECK_THROWS_AS(PiecewiseControl({0.0, 1.0}, {}, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseControl({0.0, 0.5}, {SpdMatrix::scalar(1.0)}, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseControl({0.0, 1.0}, {SpdMatrix::scalar(1.0)}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseControl({0.0, 1.0}, {SpdMatrix::scalar(5.0)}, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseControl({0.0, 1.0}, {SpdMatrix::scalar(0.2)}, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseControl({0.0, 0.6, 0.6, 1.0}, {SpdMatrix::scalar(1.0), SpdMatrix::scalar(1.0),
                                                           SpdMatrix::scalar(1.0)},
                                   4.0),
                  std::invalid_argument);
  CHECK_NOTHROW(PiecewiseControl({0.0, 1.0}, {SpdMatrix::scalar(4.0)}, 4.0));
}

TEST_CASE("deterministic objective examples") {
  const QuadRule rule = gauss_hermite(64);
  const double S0[] = {0.7};
  for (auto method : kMethods) {
    for (const auto& c : {scalar_control({1.0}), scalar_control({2.0, 0.5}), scalar_control({3.0, 0.3, 1.2})}) {
      const auto flat = objective_deterministic(constant_payoff(0.4, 1), c, S0, rule, method);
      CHECK(flat.payoff_part == doctest::Approx(0.4).epsilon(1e-13));
      CHECK(flat.value == doctest::Approx(0.4 - specific_entropy(c)).epsilon(1e-13));
      CHECK(flat.std_err == 0.0);
      const auto lin = PayoffSpec::linear_adjusted(0.0, {1.0}, constant_payoff(0.0, 1));
      const auto v = objective_deterministic(lin, c, S0, rule, method);
      CHECK(v.value == doctest::Approx(0.7 - v.entropy_part).epsilon(1e-12));
    }
  }
  const auto put = PayoffSpec::put(1.0, {1.0});
  const auto exact = objective_deterministic(put, scalar_control({1.0}), kOrigin, rule, Integration::piecewise_exact);
  CHECK(exact.value == doctest::Approx(put_mean(1.0)).epsilon(1e-13));
  CHECK(exact.value == doctest::Approx(0.368746).epsilon(1e-6));
  for (double s : {0.05, 0.5, 2.0, 9.0}) {
    const auto v = objective_deterministic(put, scalar_control({s}), kOrigin, rule, Integration::piecewise_exact);
    REQUIRE(v.payoff_part == doctest::Approx(put_mean(std::sqrt(s))).epsilon(1e-12));
  }
  // Gauss-Hermite converges slowly on the kink
  const auto gh = objective_deterministic(put, scalar_control({1.0}), kOrigin, gauss_hermite(256));
  CHECK(std::abs(gh.value - put_mean(1.0)) <= 1e-3);
}

TEST_CASE("exact integration of affine pieces") {
  std::mt19937_64 gen(5);
  const QuadRule fine = gauss_hermite(256);
  for (int trial = 0; trial < 60; ++trial) {
    const double K = testing_support::unif(gen, 0.2, 2.0);
    const double a = testing_support::unif(gen, 0.5, 2.0);
    const PayoffSpec base = trial % 3 == 0   ? PayoffSpec::put(K, {a})
                            : trial % 3 == 1 ? PayoffSpec::truncated_call(K, 0.5 * K, {a})
                                             : PayoffSpec::barrier(PayoffSpec::put(K, {a}), 0.5 * K / a);
    const auto f = PayoffSpec::linear_adjusted(testing_support::unif(gen, -1, 1), {testing_support::unif(gen, -1, 1)}, base);
    const double S0[] = {testing_support::unif(gen, -1.0, 1.0)};
    const double s = testing_support::unif(gen, 0.3, 3.0);
    const auto e = objective_deterministic(f, scalar_control({s}), S0, fine, Integration::piecewise_exact);
    // Simpson oracle between the known kinks and jumps, endpoints taken from inside each piece
    const double sd = std::sqrt(s);
    std::vector<double> cuts{S0[0] - 12.0 * sd, S0[0] + 12.0 * sd};
    for (double r : {K / a, 0.5 * K / a, 1.5 * K / a, 0.0}) {
      for (double c : {-r, r}) {
        if (c > cuts[0] && c < cuts[1]) cuts.push_back(c);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    const auto density = [&](double x) { return eval_payoff(f, x) * phi((x - S0[0]) / sd) / sd; };
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double lo = cuts[k];
      const double hi = cuts[k + 1];
      if (hi - lo < 1e-12) continue;
      const int cells = 2000;
      const double h = (hi - lo) / cells;
      const double nudge = 1e-12 * (hi - lo);
      double part = density(lo + nudge) + density(hi - nudge);
      for (int i = 1; i < cells; ++i) part += (i % 2 ? 4.0 : 2.0) * density(lo + h * i);
      acc += part * h / 3.0;
    }
    REQUIRE(std::abs(e.payoff_part - acc) <= 1e-10);
  }
}

TEST_CASE("two-dimensional put") {
  // E(1 - |X| - |Y|)^+ = E g(1 - |X|) with g(k) = E(k - |Y|)^+ for k >= 0
  const auto g = [](double k) { return 2.0 * (k * (Phi(k) - 0.5) - (phi(0.0) - phi(k))); };
  const int cells = 2000;
  const double h = 1.0 / cells;
  double acc = 0.0;
  for (int i = 0; i <= cells; ++i) {
    const double x = h * i;
    const double w = (i == 0 || i == cells) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * g(1.0 - x) * phi(x);
  }
  const double oracle = 2.0 * acc * h / 3.0;
  const PiecewiseControl id = PiecewiseControl::uniform({SpdMatrix::identity(2)}, 4.0);
  const double S0[] = {0.0, 0.0};
  const auto v = objective_deterministic(PayoffSpec::put(1.0, {1.0, 1.0}), id, S0, gauss_hermite(128));
  CHECK(v.value == doctest::Approx(oracle).epsilon(3e-3));
  CHECK(v.entropy_part == 0.0);
}

TEST_CASE("sampled payoffs must cover the terminal law") {
  const auto f = quarter_square(Grid1D(-2.0, 2.0, 33));
  for (auto method : kMethods) {
    CHECK_THROWS_AS(objective_deterministic(f, scalar_control({1.0}), kOrigin, gauss_hermite(32), method),
                    std::invalid_argument);
  }
  const auto wide = quarter_square(Grid1D(-20.0, 20.0, 641));
  for (auto method : kMethods) CHECK_NOTHROW(objective_deterministic(wide, scalar_control({1.0}), kOrigin, gauss_hermite(32), method));
}

TEST_CASE("deterministic objective is concave along square-root midpoints") {
  const auto h = surrogate();
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + trial % 4;
    std::vector<SpdMatrix> A;
    std::vector<SpdMatrix> B;
    std::vector<SpdMatrix> M;
    for (std::size_t j = 0; j < m; ++j) {
      const double a = std::exp(testing_support::unif(gen, std::log(0.05), std::log(4.0)));
      const double b = std::exp(testing_support::unif(gen, std::log(0.05), std::log(4.0)));
      A.push_back(SpdMatrix::scalar(a));
      B.push_back(SpdMatrix::scalar(b));
      const double r = 0.5 * (std::sqrt(a) + std::sqrt(b));
      M.push_back(SpdMatrix::scalar(r * r));
    }
    const double S0[] = {testing_support::unif(gen, -1.5, 1.5)};
    const QuadRule rule = gauss_hermite(64);
    const auto value = [&](std::vector<SpdMatrix> p) {
      return objective_deterministic(h, PiecewiseControl::uniform(std::move(p), 100.0), S0, rule,
                                     Integration::piecewise_exact)
          .value;
    };
    REQUIRE(value(M) >= 0.5 * (value(A) + value(B)) - 1e-10);
  }
}

TEST_CASE("feedback objective examples") {
  const Grid1D g = Grid1D::aligned(0.0, -12.0, 12.0, 1.0 / 16.0);
  const auto flat = extract_control(quadratic_surface(0.0, 0.0, 0.3, g, 16));
  const auto r = objective_feedback(constant_payoff(0.3, 1), flat, kOrigin, 64, 1000, RngStream(1, 0));
  CHECK(r.value == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(r.entropy_part == 0.0);
  CHECK(r.std_err <= 1e-15);

  const auto two = extract_control(quadratic_surface(0.5, 0.0, 0.0, g, 16));
  const auto sq = quarter_square(Grid1D::aligned(0.0, -40.0, 40.0, 1.0 / 64.0));
  const auto q = objective_feedback(sq, two, kOrigin, 64, 200000, RngStream(2, 0));
  CHECK(q.entropy_part == doctest::Approx(G(2.0)).epsilon(1e-12));
  CHECK(std::abs(q.value - 0.346574) <= 3.0 * q.std_err + 1e-4);

  CHECK_THROWS_AS(objective_feedback(sq, two, kOrigin, 32, 100, RngStream(2, 0)), std::invalid_argument);
}

TEST_CASE("feedback objective reduces to the deterministic one for constant fields") {
  const Grid1D g = Grid1D::aligned(0.0, -12.0, 12.0, 1.0 / 16.0);
  const auto put = PayoffSpec::put(1.0, {1.0});
  for (double a : {0.5, -1.0}) {
    const auto field = extract_control(quadratic_surface(a, 0.0, 0.0, g, 16));
    const double s = 1.0 / (1.0 - a);
    const auto fb = objective_feedback(put, field, kOrigin, 64, 100000, RngStream(3, 0));
    const auto det = objective_deterministic(put, scalar_control({s}), kOrigin, gauss_hermite(64),
                                             Integration::piecewise_exact);
    CHECK(std::abs(fb.value - det.value) <= 3.0 * fb.std_err);
  }
}

TEST_CASE("feedback control attains the solved value") {
  const auto& u = put_surface();
  const auto fb = objective_feedback(surrogate(), extract_control(u), kOrigin, 64, 40000, RngStream(4, 0));
  CHECK(std::abs(fb.value - u.value_at(0.0, 0.0)) <= 3.0 * fb.std_err + 0.01);
}

TEST_CASE("piecewise optimiser examples") {
  const QuadRule rule = gauss_hermite(64);
  for (auto method : kMethods) {
    const auto c = optimize_piecewise(constant_payoff(0.25, 1), 3, 100.0, kOrigin, rule, method);
    CHECK(c.value.value == doctest::Approx(0.25).epsilon(1e-10));
    for (const auto& p : c.control.pieces()) CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
  }
  const auto sq = quarter_square(Grid1D::aligned(0.0, -40.0, 40.0, 1.0 / 64.0));
  const auto q = optimize_piecewise(sq, 1, 4.0, kOrigin, rule, Integration::piecewise_exact);
  CHECK(q.control.pieces()[0](0, 0) == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(q.value.value == doctest::Approx(0.346574).epsilon(1e-4));

  // single piece: brute-force scan of the closed form
  const auto put = PayoffSpec::put(1.0, {1.0});
  double best = -1.0;
  for (int i = 0; i <= 200000; ++i) {
    const double s = std::exp(-std::log(100.0) + 2.0 * std::log(100.0) * i / 200000.0);
    best = std::max(best, put_mean(std::sqrt(s)) - G(s));
  }
  const auto one = optimize_piecewise(put, 1, 100.0, kOrigin, rule, Integration::piecewise_exact);
  CHECK(one.value.value == doctest::Approx(best).epsilon(1e-8));
  CHECK(one.value.value >= best - 1e-12);

  CHECK_THROWS_AS(optimize_piecewise(put, 9, 100.0, kOrigin, rule), std::invalid_argument);
  CHECK_THROWS_AS(optimize_piecewise(put, 2, 200.0, kOrigin, rule), std::invalid_argument);
}

TEST_CASE("piecewise optimiser on the put") {
  const QuadRule rule = gauss_hermite(64);
  const auto put = PayoffSpec::put(1.0, {1.0});
  const double u0 = put_surface().value_at(0.0, 0.0);
  double prev = -1.0;
  for (std::size_t m : {1u, 2u, 4u}) {
    const auto r = optimize_piecewise(put, m, 100.0, kOrigin, rule, Integration::piecewise_exact);
    CHECK(r.value.value >= prev - 1e-8);
    CHECK(r.value.value <= u0 + 1e-3);
    CHECK(r.value.value == doctest::Approx(r.value.payoff_part - r.value.entropy_part).epsilon(1e-14));
    prev = r.value.value;
  }
}

TEST_CASE("lower bound examples") {
  const double zero[] = {0.0};
  const double half[] = {0.5};
  CHECK(lower_bound_cn(0.5, zero, 3) == 0.5);
  CHECK(lower_bound_cn(0.5, half, 2) == doctest::Approx(0.4375).epsilon(1e-15));
  CHECK_THROWS_AS(lower_bound_cn(0.5, half, 0), std::invalid_argument);
}

TEST_CASE("lower bound sits below the certainty equivalent") {
  const QuadRule rule = gauss_hermite(64);
  const auto put = PayoffSpec::put(1.0, {1.0});
  const double b[] = {0.4};
  const MarketSpec mk({0.0}, {0.4});
  const auto pw = optimize_piecewise(put, 2, 100.0, kOrigin, rule, Integration::piecewise_exact);
  const Grid1D g = Grid1D::aligned(0.0, -8.0, 8.0, 1.0 / 32.0);
  for (std::size_t n : {2u, 4u}) {
    const auto ce = certainty_equivalent(put, n, mk, g, rule, Integration::piecewise_exact);
    CHECK(lower_bound_cn(pw.value.value, b, n) <= ce.c_n + 1e-6);
  }
}
