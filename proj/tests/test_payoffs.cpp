#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entropic_hedge/payoffs.hpp"
#include "support.hpp"

using namespace ehedge;

namespace {

PayoffSpec clipped_half_square(double lo, double hi, std::size_t count) {
  const Grid1D g(lo, hi, count);
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = 0.5 * g.node(i) * g.node(i);
  return PayoffSpec::sampled({g}, v, true);
}

}  // namespace

TEST_CASE("payoff values") {
  const auto put = PayoffSpec::put(1.0, {1.0});
  CHECK(eval_payoff(put, 0.0) == 1.0);
  CHECK(eval_payoff(put, 2.0) == 0.0);
  CHECK(eval_payoff(put, -0.25) == 0.75);
  const auto tc = PayoffSpec::truncated_call(1.0, 1.0, {1.0});
  CHECK(eval_payoff(tc, 1.5) == 0.5);
  CHECK(eval_payoff(tc, 5.0) == 1.0);
  CHECK(eval_payoff(tc, 0.5) == 0.0);
  const auto put2 = PayoffSpec::put(2.0, {1.0, 0.5});
  const double x2[] = {0.5, -1.0};
  CHECK(eval_payoff(put2, x2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(eval_payoff(put2, 0.0), std::invalid_argument);
  CHECK(eval_payoff(constant_payoff(0.3, 1), 17.0) == doctest::Approx(0.3));
}

TEST_CASE("payoff factories validate their inputs") {
  CHECK_THROWS_AS(PayoffSpec::put(-1.0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(PayoffSpec::put(1.0, {-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(PayoffSpec::truncated_call(1.0, -1.0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(PayoffSpec::barrier(PayoffSpec::put(1.0, {1.0}), 0.0), std::invalid_argument);
  const Grid1D g(-1.0, 1.0, 3);
  CHECK_THROWS_AS(PayoffSpec::barrier(PayoffSpec::sampled({g}, {0.0, 1.0, 2.0}, false), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(PayoffSpec::barrier(PayoffSpec::sampled({g}, {0.0, -1.0, 2.0}, true), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(PayoffSpec::linear_adjusted(0.0, {1.0, 2.0}, PayoffSpec::put(1.0, {1.0})), std::invalid_argument);
}

TEST_CASE("assumption check examples") {
  const auto put = PayoffSpec::put(1.0, {1.0});
  const Grid1D probe4(-4.0, 4.0, 129);
  const auto r1 = validate_assumption(put, 2.0, 0.5, std::span<const Grid1D>(&probe4, 1));
  CHECK(r1.passed);
  CHECK(r1.violations.empty());
  CHECK(r1.probed_nodes > 0);

  const auto barrier = PayoffSpec::barrier(PayoffSpec::put(1.0, {0.0}), 1.0);
  CHECK(eval_payoff(barrier, 0.5) == 1.0);
  CHECK(eval_payoff(barrier, 1.0) == 0.0);
  const auto r2 = validate_assumption(barrier, 2.0, 0.9, std::span<const Grid1D>(&probe4, 1));
  CHECK(r2.passed);

  const auto sq = clipped_half_square(-3.0, 3.0, 97);
  const Grid1D probe2(-2.0, 2.0, 65);
  const auto r3 = validate_assumption(sq, 1.0, 0.5, std::span<const Grid1D>(&probe2, 1));
  CHECK_FALSE(r3.passed);
  bool hessian = false;
  for (const auto& v : r3.violations) {
    if (v.kind == ViolationKind::hessian) {
      hessian = true;
      CHECK(v.value == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(std::abs(v.location[0]) > 1.0);
    }
  }
  CHECK(hessian);
  CHECK(r3.passed == r3.violations.empty());
}

TEST_CASE("unbounded sampled payoffs are flagged") {
  const Grid1D g(-4.0, 4.0, 9);
  std::vector<double> v(9);
  for (std::size_t i = 0; i < 9; ++i) v[i] = g.node(i);
  const auto f = PayoffSpec::sampled({g}, v, false);
  CHECK_FALSE(payoff_bound(f).has_value());
  const auto rep = find_assumption_radius(f, 0.5, 0.0625);
  CHECK_FALSE(rep.passed);
  bool flagged = false;
  for (const auto& viol : rep.violations) flagged = flagged || viol.kind == ViolationKind::unbounded;
  CHECK(flagged);
}

TEST_CASE("assumption radius search") {
  const auto rep = find_assumption_radius(PayoffSpec::put(1.0, {1.0}), 0.5, 0.0625);
  CHECK(rep.passed);
  CHECK(rep.M == doctest::Approx(2.0));
  const auto tc = find_assumption_radius(PayoffSpec::truncated_call(1.0, 1.0, {1.0}), 0.5, 0.0625);
  CHECK(tc.passed);
  const auto two = find_assumption_radius(PayoffSpec::put(1.0, {1.0, 1.0}), 0.5, 0.125);
  CHECK(two.passed);
  CHECK(two.probed_nodes > 0);
}

TEST_CASE("put and truncated call are Lipschitz") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + trial % 2;
    std::vector<double> a(d);
    double sum = 0.0;
    for (auto& v : a) {
      v = testing_support::unif(gen, 0.0, 2.0);
      sum += v;
    }
    const double K = testing_support::unif(gen, 0.0, 3.0);
    const PayoffSpec f = trial % 4 < 2 ? PayoffSpec::put(K, a) : PayoffSpec::truncated_call(K, 0.5 * K, a);
    std::vector<double> x(d);
    std::vector<double> y(d);
    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = testing_support::unif(gen, -5, 5);
      y[i] = testing_support::unif(gen, -5, 5);
      dist = std::max(dist, std::abs(x[i] - y[i]));
    }
    REQUIRE(std::abs(eval_payoff(f, x) - eval_payoff(f, y)) <= sum * dist * static_cast<double>(d) + 1e-12);
  }
}

TEST_CASE("barrier is lower semicontinuous at the barrier") {
  const auto f = PayoffSpec::barrier(PayoffSpec::put(2.0, {1.0}), 1.0);
  for (double side : {-1.0, 1.0}) {
    const double at = eval_payoff(f, side);
    for (int k = 1; k <= 20; ++k) {
      const double inside = side * (1.0 - std::pow(2.0, -k));
      REQUIRE(eval_payoff(f, inside) >= at);
    }
  }
}

TEST_CASE("linear adjustment shifts exactly") {
  std::mt19937_64 gen(3);
  const auto base = PayoffSpec::put(1.0, {1.0, 2.0});
  const auto f = PayoffSpec::linear_adjusted(-0.7, {0.25, -1.5}, base);
  for (int trial = 0; trial < 200; ++trial) {
    const double x[] = {testing_support::unif(gen, -4, 4), testing_support::unif(gen, -4, 4)};
    REQUIRE(std::abs(eval_payoff(f, x) - eval_payoff(base, x) - (-0.7 + 0.25 * x[0] - 1.5 * x[1])) <= 1e-14);
  }
  CHECK(payoff_bound(f).value() == 1.0);
}

TEST_CASE("affine pieces reproduce one-dimensional payoffs") {
  std::mt19937_64 gen(41);
  const Grid1D g(-3.0, 3.0, 49);
  std::vector<double> sv(g.count());
  for (auto& v : sv) v = testing_support::unif(gen, 0.0, 1.0);
  const auto sampled = PayoffSpec::sampled({g}, sv, true);
  for (int trial = 0; trial < 200; ++trial) {
    const double K = testing_support::unif(gen, 0.0, 2.0);
    const double a = trial % 7 == 0 ? 0.0 : testing_support::unif(gen, 0.1, 2.0);
    PayoffSpec base = PayoffSpec::put(K, {a});
    if (trial % 4 == 1) base = PayoffSpec::truncated_call(K, 0.5 * K, {a});
    if (trial % 4 == 2) base = PayoffSpec::barrier(PayoffSpec::put(K, {a}), 0.3 + K);
    if (trial % 4 == 3) base = sampled;
    const auto f = PayoffSpec::linear_adjusted(testing_support::unif(gen, -1, 1), {testing_support::unif(gen, -1, 1)}, base);
    const auto pieces = linear_pieces_1d(f);
    REQUIRE(std::isinf(pieces.front().lo));
    REQUIRE(std::isinf(pieces.back().hi));
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) REQUIRE(pieces[k].hi == pieces[k + 1].lo);
    for (int probe = 0; probe < 50; ++probe) {
      const double x = testing_support::unif(gen, -6.0, 6.0);
      const auto it = std::find_if(pieces.begin(), pieces.end(), [&](const LinearPiece& p) { return x >= p.lo && x < p.hi; });
      REQUIRE(it != pieces.end());
      REQUIRE(std::abs(it->c0 + it->c1 * x - eval_payoff(f, x)) <= 1e-10);
    }
  }
  CHECK_THROWS_AS(linear_pieces_1d(PayoffSpec::put(1.0, {1.0, 1.0})), std::invalid_argument);
}
