// Acceptance checks: one PASS/FAIL line per criterion. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "entropic_hedge/commands.hpp"
#include "entropic_hedge/config.hpp"
#include "entropic_hedge/core.hpp"
#include "entropic_hedge/dp.hpp"
#include "entropic_hedge/dual.hpp"
#include "entropic_hedge/envelope.hpp"
#include "entropic_hedge/hjb.hpp"

using namespace ehedge;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const ExperimentConfig& put_config() {
  static const ExperimentConfig cfg = load_config(std::string(EH_SOURCE_DIR) + "/configs/put.json");
  return cfg;
}

const SolvedProblem& put_problem() {
  static const SolvedProblem sp = solve_problem(put_config());
  return sp;
}

double quadratic_error(double dx) {
  const Grid1D g = Grid1D::aligned(0.0, -8.0, 8.0, dx);
  std::vector<double> v(g.count());
  for (std::size_t i = 0; i < g.count(); ++i) v[i] = 0.25 * g.node(i) * g.node(i);
  const SmoothTerminal t = make_terminal(SampledFunction({g}, v), 0.0, 0.0);
  const ValueSurface u = solve_cauchy_1d(t, required_time_steps(t.alpha, dx, 16), BoundaryMode::curvature_copy, 16);
  double worst = 0.0;
  for (std::size_t s = 0; s <= u.snapshots; ++s) {
    const auto slice = u.slice(s);
    for (std::size_t i = 0; i < g.count(); ++i)
      worst = std::max(worst, std::abs(slice[i] - solve_quadratic_oracle(0.5, 0.0, 0.0, u.time(s), g.node(i))));
  }
  return worst;
}

Outcome quadratic_oracle() {
  const double e1 = quadratic_error(1.0 / 128.0);
  const double e2 = quadratic_error(1.0 / 256.0);
  const double ratio = e1 / e2;
  const bool accurate = e1 <= 5e-3;
  const bool reduces = ratio >= 3.0;
  return {accurate && reduces, "err(1/128)=" + fmt("%.3e", e1) + " err(1/256)=" + fmt("%.3e", e2) +
                                   " ratio=" + fmt("%.3f", ratio) + " (error<=5e-3: " + (accurate ? "yes" : "no") +
                                   ", ratio>=3: " + (reduces ? "yes" : "no") + ")"};
}

Outcome linear_exactness() {
  const auto f = PayoffSpec::linear_adjusted(0.0, {1.0}, constant_payoff(0.0, 1));
  const MarketSpec mk({1.0}, {0.5});
  const Grid1D g = Grid1D::aligned(1.0, -7.0, 9.0, 1.0 / 64.0);
  double worst = 0.0;
  for (std::size_t n : {1u, 2u, 4u, 8u}) {
    const auto r = certainty_equivalent(f, n, mk, g, gauss_hermite(64));
    worst = std::max(worst, std::abs(r.c_n - (1.0 - 0.25 / (2.0 * n))));
  }
  return {worst <= 1e-6, "max|c_n - (1 - 0.25/(2n))|=" + fmt("%.3e", worst)};
}

Outcome one_period_duality() {
  double forced = 0.0;
  double min_gap = 1.0;
  for (double lambda : {0.0, 0.5}) {
    const auto c = one_period_dual_check([](double) { return 0.3; }, lambda, 100.0);
    const auto q = one_period_dual_check([](double y) { return 0.25 * y * y; }, lambda, 100.0);
    forced = std::max(forced, std::abs(c.lhs - c.rhs));
    if (lambda == 0.0) forced = std::max(forced, std::abs(q.lhs - q.rhs));
    min_gap = std::min({min_gap, c.gap, q.gap});
  }
  return {forced <= 1e-6 && min_gap >= -1e-6,
          "max forced |lhs-rhs|=" + fmt("%.3e", forced) + " min gap=" + fmt("%.3e", min_gap)};
}

std::vector<ConvergenceRow>& put_rows() {
  static std::vector<ConvergenceRow> rows = converge_rows(put_config(), 0);
  return rows;
}

Outcome sandwich() {
  const auto& rows = put_rows();
  bool ordered = true;
  std::string detail;
  for (const auto& r : rows) {
    ordered = ordered && r.lower_bound - 1e-6 <= r.c_n && r.c_n <= r.strategy_value_exact + 1e-6;
    detail += "n=" + std::to_string(r.n) + ":" + fmt("%.6f", r.lower_bound) + "<=" + fmt("%.6f", r.c_n) + "<=" +
              fmt("%.6f", r.strategy_value_exact) + " ";
  }
  const double g4 = rows.front().gap_upper();
  const double g64 = rows.back().gap_upper();
  const double budget = 2.0 * put_config().epsilon + 0.02;
  return {ordered && g64 < g4 && g64 <= budget,
          detail + "gap_upper(4)=" + fmt("%.6f", g4) + " gap_upper(64)=" + fmt("%.6f", g64) +
              " budget=" + fmt("%.3f", budget)};
}

Outcome verification() {
  const auto& sp = put_problem();
  const PayoffSpec h = PayoffSpec::sampled(sp.terminal.h.axes, sp.terminal.h.values, true);
  const auto fb = objective_feedback(h, extract_control(*sp.surface), put_config().market.S0, 256, 1000000,
                                     RngStream(0, 7));
  const double diff = std::abs(fb.value - sp.u0);
  return {diff <= 3.0 * fb.std_err + 0.01, "feedback=" + fmt("%.6f", fb.value) + " u0=" + fmt("%.6f", sp.u0) +
                                               " stderr=" + fmt("%.2e", fb.std_err) + " diff=" + fmt("%.2e", diff)};
}

Outcome curvature() {
  const auto& u = *put_problem().surface;
  const double cap = 1.0 - u.alpha / 2.0;
  double top = -1e300;
  for (std::size_t s = 0; s <= u.snapshots; ++s)
    for (double d2 : hessian_field(u, s)) top = std::max(top, d2);
  const double march_top = 1.0 - u.alpha_prime;
  const auto b = control_bounds(extract_control(u));
  const bool ok = top <= cap + 1e-12 && march_top <= cap + 1e-12 && b.within(1e-6);
  return {ok, "max D2u=" + fmt("%.6f", std::max(top, march_top)) + " cap=" + fmt("%.6f", cap) + " eig=[" +
                  fmt("%.6f", b.min_eigen) + "," + fmt("%.6f", b.max_eigen) + "] limits=[" + fmt("%.6f", b.lower_limit) +
                  "," + fmt("%.6f", b.upper_limit) + "]"};
}

double unif(std::mt19937_64& gen, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }

SampledFunction random_function(std::mt19937_64& gen, bool two_d) {
  std::vector<Grid1D> axes{Grid1D(unif(gen, -3.0, 0.0), unif(gen, 0.5, 3.0), 3 + gen() % 8)};
  if (two_d) axes.emplace_back(-1.0, unif(gen, 0.0, 2.0), 3 + gen() % 5);
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.count();
  std::vector<double> v(total);
  for (auto& x : v) x = gen() % 2 ? unif(gen, -1.0, 1.0) : std::round(unif(gen, -3.0, 3.0));
  return SampledFunction(axes, v);
}

bool concave_along_lines(const SampledFunction& e, double tol) {
  const std::size_t nx = e.axes[0].count();
  const std::size_t ny = e.dim() == 2 ? e.axes[1].count() : 1;
  const auto at = [&](std::size_t i, std::size_t j) { return e.values[i * ny + j]; };
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      if (i > 0 && i + 1 < nx && at(i, j) < 0.5 * (at(i - 1, j) + at(i + 1, j)) - tol) return false;
      if (j > 0 && j + 1 < ny && at(i, j) < 0.5 * (at(i, j - 1) + at(i, j + 1)) - tol) return false;
    }
  return true;
}

SpdMatrix random_spd(std::mt19937_64& gen, std::size_t d) {
  std::normal_distribution<double> z;
  std::vector<double> q(d * d);
  for (auto& v : q) v = z(gen);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0.0;
      for (std::size_t r = 0; r < d; ++r) dot += q[r * d + c] * q[r * d + p];
      for (std::size_t r = 0; r < d; ++r) q[r * d + c] -= dot * q[r * d + p];
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) norm += q[r * d + c] * q[r * d + c];
    for (std::size_t r = 0; r < d; ++r) q[r * d + c] /= std::sqrt(norm);
  }
  std::vector<double> lam(d);
  for (auto& l : lam) l = std::exp(unif(gen, std::log(0.05), std::log(20.0)));
  std::vector<double> a(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) a[i * d + j] += q[i * d + k] * lam[k] * q[j * d + k];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) a[i * d + j] = a[j * d + i];
  return SpdMatrix(d, a);
}

Outcome property_suites() {
  std::mt19937_64 gen(20240607);
  int env_fail = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const SampledFunction g = random_function(gen, trial % 2 == 1);
    const SampledFunction e = concave_envelope(g);
    double scale = 1.0;
    for (double v : g.values) scale = std::max(scale, std::abs(v));
    bool ok = concave_along_lines(e, 1e-12 * scale) && concave_envelope(e).values == e.values;
    SampledFunction bigger = g;
    for (auto& v : bigger.values) v += gen() % 3 == 0 ? unif(gen, 0.0, 1.0) : 0.0;
    const SampledFunction eb = concave_envelope(bigger);
    for (std::size_t k = 0; k < g.size(); ++k)
      ok = ok && e.values[k] >= g.values[k] && eb.values[k] >= e.values[k] - 1e-12 * scale;
    env_fail += ok ? 0 : 1;
  }
  int spd_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const SpdMatrix a = random_spd(gen, d);
    const SpdMatrix b = random_spd(gen, d);
    const double ga = entropy_rate(a);
    const double gm = entropy_rate(SpdMatrix::combine(0.5, a, 0.5, b));
    const double eig = entropy_rate_eigen(symmetric_eigen(d, a.entries()).values);
    const bool ok = ga >= -1e-14 && gm <= 0.5 * (ga + entropy_rate(b)) + 1e-12 * (1.0 + ga) &&
                    std::abs(ga - eig) <= 1e-12 * (1.0 + ga);
    spd_fail += ok ? 0 : 1;
  }
  return {env_fail == 0 && spd_fail == 0,
          "envelope failures " + std::to_string(env_fail) + "/500, entropy failures " + std::to_string(spd_fail) + "/1000"};
}

ValueSurface put_surface(double K, double a) {
  const SmoothTerminal t = build_terminal(PayoffSpec::put(K, {a}), 0.05, {Grid1D::aligned(0.0, -6.0, 6.0, 1.0 / 16.0)}, 64);
  return solve_cauchy_1d(t, required_time_steps(t.alpha, 1.0 / 16.0, 64), BoundaryMode::curvature_copy, 64);
}

Outcome separable() {
  const ValueSurface u1 = put_surface(1.0, 1.0);
  const ValueSurface u2 = put_surface(0.5, 2.0);
  const ValueSurface uc = compose_separable(u1, u2);
  const std::size_t nx = u1.axes[0].count();
  const std::size_t ny = u2.axes[0].count();
  double res_dev = 0.0;
  bool additive = true;
  for (std::size_t s = 0; s <= uc.snapshots; ++s) {
    const auto a = u1.slice(s);
    const auto b = u2.slice(s);
    const auto c = uc.slice(s);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) additive = additive && c[i * ny + j] == a[i] + b[j];
    if (s == 0) continue;
    const auto r1 = pde_residual_field(u1, s);
    const auto r2 = pde_residual_field(u2, s);
    const auto rc = pde_residual_field(uc, s);
    for (std::size_t i = 1; i + 1 < nx; ++i)
      for (std::size_t j = 1; j + 1 < ny; ++j) res_dev = std::max(res_dev, std::abs(rc[i * ny + j] - r1[i] - r2[j]));
  }
  return {additive && res_dev <= 1e-10, "max|r2D - r1 - r2|=" + fmt("%.3e", res_dev) +
                                            " values additive: " + (additive ? "yes" : "no")};
}

Outcome determinism() {
  std::ostringstream first;
  write_convergence_csv(first, put_rows(), put_config(), 0);
  std::string runs[2];
  const unsigned threads[2] = {1, 4};
  const unsigned saved = worker_threads();
  for (int k = 0; k < 2; ++k) {
    set_worker_threads(threads[k]);
    std::ostringstream out;
    std::ostringstream err;
    run_command("converge", put_config(), CommandOptions{}, out, err);
    runs[k] = out.str();
  }
  set_worker_threads(saved);
  const bool repeat = runs[0].find(first.str()) != std::string::npos;
  const bool threads_same = runs[0] == runs[1];
  return {repeat && threads_same, std::string("repeat identical: ") + (repeat ? "yes" : "no") +
                                      ", threads 1 vs 4 identical: " + (threads_same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"quadratic HJB oracle", quadratic_oracle},
      {"linear payoff exactness", linear_exactness},
      {"one-period duality", one_period_duality},
      {"sandwich and convergence", sandwich},
      {"feedback verification", verification},
      {"curvature propagation", curvature},
      {"envelope and entropy properties", property_suites},
      {"separable 2D", separable},
      {"determinism", determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
