#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "entropic_hedge/hjb.hpp"
#include "support.hpp"

using namespace ehedge;

namespace {

SmoothTerminal terminal_from(const Grid1D& g, const std::function<double(double)>& h) {
  std::vector<double> v(g.count());
  for (std::size_t i = 0; i < g.count(); ++i) v[i] = h(g.node(i));
  return make_terminal(SampledFunction({g}, v), 0.0, 0.0);
}

ValueSurface solve(const SmoothTerminal& t, std::size_t snapshots = 16) {
  return solve_cauchy_1d(t, required_time_steps(t.alpha, t.h.axes[0].step(), snapshots), BoundaryMode::curvature_copy,
                         snapshots);
}

double max_error_vs_oracle(const ValueSurface& u, double a, double b, double c, double half_width) {
  double worst = 0.0;
  for (std::size_t s = 0; s <= u.snapshots; ++s) {
    const auto slice = u.slice(s);
    for (std::size_t i = 0; i < u.axes[0].count(); ++i) {
      const double x = u.axes[0].node(i);
      if (std::abs(x) > half_width) continue;
      worst = std::max(worst, std::abs(slice[i] - solve_quadratic_oracle(a, b, c, u.time(s), x)));
    }
  }
  return worst;
}

const SmoothTerminal& put_terminal() {
  static const SmoothTerminal t =
      build_terminal(PayoffSpec::put(1.0, {1.0}), 0.05, {Grid1D::aligned(0.0, -20.0, 20.0, 1.0 / 32.0)}, 64);
  return t;
}

const ValueSurface& put_surface() {
  static const ValueSurface u = solve(put_terminal(), 64);
  return u;
}

}  // namespace

TEST_CASE("quadratic oracle") {
  CHECK(solve_quadratic_oracle(0.0, 0.3, 0.1, 0.2, 2.0) == doctest::Approx(0.7));
  CHECK(solve_quadratic_oracle(0.5, 0.0, 0.0, 0.0, 0.0) == doctest::Approx(0.3465736).epsilon(1e-7));
  CHECK(solve_quadratic_oracle(-1.0, 0.0, 0.0, 0.0, 0.0) == doctest::Approx(-0.3465736).epsilon(1e-7));
  CHECK_THROWS_AS(solve_quadratic_oracle(1.0, 0.0, 0.0, 0.0, 0.0), std::domain_error);
}

TEST_CASE("constant and linear terminals are stationary") {
  const Grid1D g(-8.0, 8.0, 129);
  const auto uc = solve(terminal_from(g, [](double) { return 0.7; }));
  for (double v : uc.values) REQUIRE(v == 0.7);
  CHECK(pde_residual(uc) == 0.0);
  const auto ul = solve(terminal_from(g, [](double x) { return 0.3 * x - 0.2; }));
  for (std::size_t s = 0; s <= ul.snapshots; ++s)
    for (std::size_t i = 0; i < g.count(); ++i) REQUIRE(std::abs(ul.slice(s)[i] - (0.3 * g.node(i) - 0.2)) <= 1e-13);
  const double mid[] = {1.7};
  CHECK(gradient_at(ul, 0.3, mid).value[0] == doctest::Approx(0.3).epsilon(1e-12));
  const ControlField cc = extract_control(uc);
  for (double s : cc.entries) REQUIRE(s == doctest::Approx(1.0));
}

TEST_CASE("quadratic terminal matches the closed form") {
  const Grid1D g(-12.0, 12.0, 385);
  const auto u = solve(terminal_from(g, [](double x) { return 0.25 * x * x; }));
  CHECK(u.value_at(0.0, 0.0) == doctest::Approx(0.3465736).epsilon(1e-7));
  CHECK(max_error_vs_oracle(u, 0.5, 0.0, 0.0, 8.0) <= 1e-9);
  const double x2[] = {2.0};
  CHECK(gradient_at(u, 0.5, x2).value[0] == doctest::Approx(1.0).epsilon(1e-9));
  const ControlField c = extract_control(u);
  for (double s : c.entries) REQUIRE(s == doctest::Approx(2.0).epsilon(1e-9));

  const auto concave = solve(terminal_from(g, [](double x) { return -0.5 * x * x; }));
  for (double s : extract_control(concave).entries) REQUIRE(s == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(max_error_vs_oracle(concave, -1.0, 0.0, 0.0, 8.0) <= 1e-9);
}

TEST_CASE("oracle error stays small across refinements") {
  for (double dx : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
    const Grid1D g = Grid1D::aligned(0.0, -12.0, 12.0, dx);
    const auto u = solve(terminal_from(g, [](double x) { return 0.25 * x * x; }));
    CHECK(max_error_vs_oracle(u, 0.5, 0.0, 0.0, 8.0) <= 1e-10);
  }
}

TEST_CASE("CFL violation names the required step count") {
  const Grid1D g(-4.0, 4.0, 129);
  const auto t = terminal_from(g, [](double x) { return 0.25 * x * x; });
  const std::size_t need = required_time_steps(t.alpha, g.step(), 16);
  try {
    solve_cauchy_1d(t, 16, BoundaryMode::curvature_copy, 16);
    FAIL("expected std::invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(std::to_string(need)) != std::string::npos);
  }
  CHECK_THROWS_AS(solve_cauchy_1d(t, need + 1, BoundaryMode::curvature_copy, 16), std::invalid_argument);
}

TEST_CASE("residual of closed-form surfaces") {
  // second differences of |x| <= 4 values lose about |u| * eps / dx^2 to roundoff
  const Grid1D g(-4.0, 4.0, 129);
  CHECK(pde_residual(quadratic_surface(0.5, 0.1, 0.2, g, 32)) <= 1e-12);
  CHECK(pde_residual(quadratic_surface(0.0, 0.0, 3.0, g, 32)) == 0.0);
}

TEST_CASE("comparison, shift and translation") {
  const Grid1D g = Grid1D::aligned(0.0, -10.0, 10.0, 1.0 / 16.0);
  const auto base = [](double x) { return 0.8 * std::exp(-0.5 * x * x) + 0.1 * x; };
  const auto bump = [&](double x) { return base(x) + 0.05 * std::exp(-0.125 * (x - 1.0) * (x - 1.0)); };
  const auto t1 = terminal_from(g, base);
  const auto t2 = terminal_from(g, bump);
  const double alpha = std::min(t1.alpha, t2.alpha);
  const std::size_t nt = required_time_steps(alpha, g.step(), 16);
  const auto u1 = solve_cauchy_1d(t1, nt, BoundaryMode::curvature_copy, 16);
  const auto u2 = solve_cauchy_1d(t2, nt, BoundaryMode::curvature_copy, 16);
  for (std::size_t k = 0; k < u1.values.size(); ++k) REQUIRE(u1.values[k] <= u2.values[k] + 1e-10);

  SmoothTerminal shifted = t1;
  for (auto& v : shifted.h.values) v += 0.375;
  const auto us = solve_cauchy_1d(shifted, nt, BoundaryMode::curvature_copy, 16);
  for (std::size_t k = 0; k < u1.values.size(); ++k) REQUIRE(std::abs(us.values[k] - (u1.values[k] + 0.375)) <= 1e-12);

  const double y = 0.5;  // eight grid steps
  const Grid1D moved(g.lo() + y, g.hi() + y, g.count());
  SmoothTerminal translated = t1;
  translated.h = SampledFunction({moved}, t1.h.values);
  const auto ut = solve_cauchy_1d(translated, nt, BoundaryMode::curvature_copy, 16);
  for (double t : {0.0, 0.5, 1.0})
    for (double x = -4.0; x <= 4.0; x += 0.25) REQUIRE(std::abs(ut.value_at(t, x + y) - u1.value_at(t, x)) <= 1e-12);
}

TEST_CASE("put surface curvature and control bounds") {
  const auto& t = put_terminal();
  const auto& u = put_surface();
  CHECK(u.clamp_count == 0);
  CHECK_FALSE(u.clamp_warning);
  CHECK(u.alpha_prime >= t.alpha / 2.0);
  for (std::size_t s = 0; s <= u.snapshots; ++s) {
    for (double d2 : hessian_field(u, s)) {
      REQUIRE(d2 <= 1.0 - t.alpha / 2.0 + 1e-12);
      REQUIRE(d2 >= -2.0 * t.C - 1e-9);
    }
  }
  const auto bounds = control_bounds(extract_control(u));
  CHECK(bounds.within(1e-6));
  CHECK(bounds.lower_limit == doctest::Approx(1.0 / (1.0 + 2.0 * t.C)));
  CHECK(bounds.upper_limit == doctest::Approx(std::max(t.C, 2.0 / t.alpha) / 2.0));
  const double far[] = {6.0};
  CHECK(std::abs(gradient_at(u, 0.0, far).value[0]) <= 1e-2);
  const double outside[] = {100.0};
  CHECK(gradient_at(u, 0.0, outside).clamped);
  // regression fixtures for dx = 1/32
  CHECK(u.value_at(0.0, 0.0) == doctest::Approx(0.5058).epsilon(2e-3));
  CHECK(u.residual_max < 0.05);
}

TEST_CASE("separable composition") {
  const Grid1D g(-8.0, 8.0, 129);
  const auto q = quadratic_surface(0.5, 0.0, 0.0, g, 16);
  const auto qq = compose_separable(q, q);
  const double origin[] = {0.0, 0.0};
  CHECK(qq.value_at(0.0, origin) == doctest::Approx(2.0 * 0.3465736).epsilon(1e-7));
  const auto c1 = quadratic_surface(0.0, 0.0, 0.4, g, 16);
  const auto c2 = quadratic_surface(0.0, 0.0, -0.1, g, 16);
  for (double v : compose_separable(c1, c2).values) REQUIRE(v == doctest::Approx(0.3));

  const auto& u = put_surface();
  const Grid1D gc(-2.0, 2.0, 9);
  const auto cst = quadratic_surface(0.0, 0.0, 0.25, gc, u.snapshots);
  const auto uc = compose_separable(u, cst);
  for (double x = -3.0; x <= 3.0; x += 0.5)
    for (double y : {-1.5, 0.0, 2.0}) {
      const double p[] = {x, y};
      REQUIRE(uc.value_at(0.5, p) == doctest::Approx(u.value_at(0.5, x) + 0.25).epsilon(1e-14));
    }
  CHECK_THROWS_AS(compose_separable(q, quadratic_surface(0.5, 0.0, 0.0, g, 8)), std::invalid_argument);
}

TEST_CASE("surface round trip") {
  const Grid1D g(-4.0, 4.0, 33);
  const auto u = solve(terminal_from(g, [](double x) { return 0.1 * std::cos(x); }));
  std::stringstream ss;
  save_surface(ss, u);
  const auto back = load_surface(ss);
  CHECK(back.values == u.values);
  CHECK(back.snapshots == u.snapshots);
  CHECK(back.alpha == u.alpha);
  CHECK(back.residual_max == u.residual_max);
  std::stringstream bad("entropic-hedge-surface 1\ngarbage\n");
  CHECK_THROWS_AS(load_surface(bad), std::runtime_error);
}
