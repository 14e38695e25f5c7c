#include "entropic_hedge/commands.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "entropic_hedge/dp.hpp"
#include "entropic_hedge/dual.hpp"
#include "entropic_hedge/hedging.hpp"

namespace ehedge {

NumericalFailure::NumericalFailure(std::string mod, const std::string& what)
    : std::runtime_error(what), module(std::move(mod)) {}

LogLevel log_level() {
  const char* v = std::getenv("ENTROPIC_HEDGE_LOG");
  if (!v) return LogLevel::error;
  const std::string s(v);
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  return LogLevel::error;
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
auto stage(const char* module, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericalFailure&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw NumericalFailure(module, e.what());
  }
}

void log(std::ostream& err, LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static const char* names[] = {"error", "info", "debug"};
  err << '[' << names[static_cast<int>(level)] << "] " << msg << '\n';
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const PayoffSpec& require_payoff(const ExperimentConfig& cfg, const char* command) {
  if (!cfg.payoff) throw ConfigError(std::string(command) + ": config has no payoff");
  return *cfg.payoff;
}

void require_1d(const ExperimentConfig& cfg, const char* command) {
  if (cfg.market.dim() != 1) throw ConfigError(std::string(command) + ": only d = 1 is supported");
}

Grid1D region_grid(const ExperimentConfig& cfg, double pad) {
  const double s0 = cfg.market.S0[0];
  return Grid1D::aligned(s0, s0 - cfg.half_width - pad, s0 + cfg.half_width + pad, cfg.dx);
}

SampledFunction quadratic_terminal(const TerminalConfig& t, const Grid1D& grid) {
  std::vector<double> values(grid.count());
  for (std::size_t i = 0; i < grid.count(); ++i) {
    const double x = grid.node(i);
    values[i] = 0.5 * t.a * x * x + t.b * x + t.c;
  }
  return SampledFunction({grid}, std::move(values));
}

void emit(const CommandOptions& opts, const std::string& file, const std::string& content, std::ostream& out) {
  if (opts.out_dir.empty()) {
    out << content;
    return;
  }
  std::filesystem::create_directories(opts.out_dir);
  const auto path = std::filesystem::path(opts.out_dir) / file;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path.string());
  os << content;
}

std::uint64_t mc_stream(std::size_t n) { return 1000 + n; }
constexpr std::uint64_t kFeedbackStream = 7;

}  // namespace

SolvedProblem solve_problem(const ExperimentConfig& cfg) {
  require_1d(cfg, "solve");
  SolvedProblem sp;
  const double s0 = cfg.market.S0[0];
  switch (cfg.terminal.kind) {
    case TerminalConfig::Kind::envelope: {
      const PayoffSpec& f = require_payoff(cfg, "solve");
      double pad = 6.0;
      for (int attempt = 0;; ++attempt) {
        const Grid1D grid = region_grid(cfg, pad);
        sp.terminal = stage("envelope", [&] { return build_terminal(f, cfg.epsilon, {grid}, cfg.terminal_rule_order); });
        const double need = 6.0 / std::sqrt(sp.terminal.alpha);
        if (need <= pad || attempt == 3) break;
        pad = std::ceil(need);
      }
      break;
    }
    case TerminalConfig::Kind::quadratic: {
      const double alpha = std::min(1.0, 1.0 - cfg.terminal.a);
      const Grid1D grid = region_grid(cfg, std::ceil(6.0 / std::sqrt(alpha)));
      sp.terminal = stage("envelope", [&] { return make_terminal(quadratic_terminal(cfg.terminal, grid), 0.0, 0.0); });
      break;
    }
    case TerminalConfig::Kind::file: {
      sp.terminal = stage("envelope", [&] {
        std::ifstream in(cfg.terminal.path);
        if (!in) throw std::runtime_error("cannot open terminal file " + cfg.terminal.path);
        return load_terminal(in);
      });
      if (sp.terminal.h.dim() != 1) throw ConfigError("terminal file: only d = 1 is supported");
      if (!sp.terminal.h.axes[0].contains(s0)) throw ConfigError("terminal file: grid does not contain S0");
      break;
    }
  }
  const double dx = sp.terminal.h.axes[0].step();
  sp.n_t = required_time_steps(sp.terminal.alpha, dx, cfg.snapshots);
  auto surface = stage("hjb", [&] { return solve_cauchy_1d(sp.terminal, sp.n_t, cfg.boundary, cfg.snapshots); });
  sp.u0 = surface.value_at(0.0, s0);
  if (cfg.terminal.kind == TerminalConfig::Kind::quadratic) {
    double worst = 0.0;
    const Grid1D& g = surface.axes[0];
    for (std::size_t s = 0; s <= surface.snapshots; ++s) {
      const auto slice = surface.slice(s);
      for (std::size_t i = 0; i < g.count(); ++i) {
        const double x = g.node(i);
        if (std::abs(x - s0) > cfg.half_width) continue;
        const double exact = solve_quadratic_oracle(cfg.terminal.a, cfg.terminal.b, cfg.terminal.c, surface.time(s), x);
        worst = std::max(worst, std::abs(slice[i] - exact));
      }
    }
    sp.oracle_error = worst;
  }
  sp.surface = std::make_shared<const ValueSurface>(std::move(surface));
  return sp;
}

bool sandwich_holds(const ConvergenceRow& row, double tol) {
  return row.lower_bound <= row.c_n + tol && row.c_n <= row.strategy_value_exact + tol;
}

std::vector<ConvergenceRow> converge_rows(const ExperimentConfig& cfg, std::uint64_t seed) {
  require_1d(cfg, "converge");
  const PayoffSpec& f = require_payoff(cfg, "converge");
  const SolvedProblem sp = solve_problem(cfg);
  const auto strategy = StrategySpec::gradient_of(sp.surface);
  const Grid1D grid = region_grid(cfg, 0.0);
  const QuadRule rule = gauss_hermite(cfg.quadrature_order);
  const auto pw = stage("dual", [&] {
    return optimize_piecewise(f, cfg.converge_pieces, cfg.K, cfg.market.S0, gauss_hermite(cfg.dual_rule_order), cfg.integration);
  });
  std::vector<ConvergenceRow> rows;
  for (std::size_t n : cfg.n_list) {
    ConvergenceRow row;
    row.n = n;
    row.c_n = stage("dp", [&] { return certainty_equivalent(f, n, cfg.market, grid, rule, cfg.integration).c_n; });
    row.strategy_value_exact = stage("hedging", [&] { return criterion_exact_1d(f, strategy, n, cfg.market, grid, rule, cfg.integration); });
    const auto est = stage("hedging", [&] {
      const auto batch = simulate_paths(cfg.market, n, cfg.mc_paths, RngStream(seed, mc_stream(n)));
      return criterion_mc(batch, f, strategy, n);
    });
    row.strategy_value_mc = est.value;
    row.mc_stderr = est.std_err;
    row.dual_value = pw.value.value;
    row.dual_entropy = pw.value.entropy_part;
    row.lower_bound = lower_bound_cn(pw.value.value, cfg.market.b, n);
    row.drift_term = cfg.market.drift_norm2() / (2.0 * static_cast<double>(n));
    row.limit_u0 = sp.u0;
    rows.push_back(row);
  }
  return rows;
}

std::string csv_header_comment(const std::string& command, const ExperimentConfig& cfg, std::uint64_t seed) {
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "# entropic-hedge %s command=%s config_hash=%016" PRIx64 " seed=%" PRIu64 " integration=%s\n", kVersion,
                command.c_str(), cfg.hash, seed, to_string(cfg.integration));
  return buf;
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows, const ExperimentConfig& cfg,
                           std::uint64_t seed) {
  os << csv_header_comment("converge", cfg, seed);
  os << "n,c_n,lower_bound,strategy_value_exact,strategy_value_mc,mc_stderr,limit_u0,gap_upper,gap_lower,"
        "dual_value,dual_entropy,drift_term,epsilon,sandwich_ok\n";
  for (const auto& r : rows) {
    os << r.n << ',' << num(r.c_n) << ',' << num(r.lower_bound) << ',' << num(r.strategy_value_exact) << ','
       << num(r.strategy_value_mc) << ',' << num(r.mc_stderr) << ',' << num(r.limit_u0) << ',' << num(r.gap_upper())
       << ',' << num(r.gap_lower()) << ',' << num(r.dual_value) << ',' << num(r.dual_entropy) << ','
       << num(r.drift_term) << ',' << num(cfg.epsilon) << ',' << (sandwich_holds(r) ? 1 : 0) << '\n';
  }
}

namespace {

int cmd_check(const ExperimentConfig& cfg, std::ostream& out) {
  const PayoffSpec& f = require_payoff(cfg, "check");
  const auto rep = stage("payoffs", [&] { return find_assumption_radius(f, cfg.check_alpha, cfg.probe_step); });
  out << "check M=" << num(rep.M) << " alpha=" << num(rep.alpha) << " bound_sup=" << num(rep.bound_sup)
      << " probed=" << rep.probed_nodes << " violations=" << rep.violations.size()
      << " passed=" << (rep.passed ? "yes" : "no") << '\n';
  const std::size_t shown = std::min<std::size_t>(rep.violations.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& v = rep.violations[i];
    out << "violation kind=" << to_string(v.kind) << " value=" << num(v.value) << " at=";
    for (std::size_t a = 0; a < v.location.size(); ++a) out << (a ? "," : "") << num(v.location[a]);
    out << '\n';
  }
  return rep.passed ? kExitOk : kExitViolation;
}

int cmd_solve(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  const SolvedProblem sp = solve_problem(cfg);
  const ValueSurface& u = *sp.surface;
  out << "solve u0=" << num(sp.u0) << " alpha=" << num(u.alpha) << " alpha_prime=" << num(u.alpha_prime)
      << " C=" << num(u.C) << " residual_max=" << num(u.residual_max) << " epsilon=" << num(sp.terminal.epsilon)
      << " epsilon_target=" << num(sp.terminal.epsilon_target) << " gap_2eps=" << num(2.0 * sp.terminal.epsilon_target)
      << " delta=" << num(sp.terminal.delta) << " n_t=" << sp.n_t << " clamps=" << u.clamp_count << '\n';
  int code = kExitOk;
  if (sp.oracle_error) {
    constexpr double kOracleTol = 5e-3;
    const bool ok = *sp.oracle_error <= kOracleTol;
    out << "oracle_error=" << num(*sp.oracle_error) << " tolerance=" << num(kOracleTol) << " ok=" << (ok ? "yes" : "no")
        << '\n';
    if (!ok) code = kExitViolation;
  }
  if (u.clamp_warning) {
    log(err, LogLevel::error, "curvature clamp engaged on more than 0.1% of node updates");
    code = kExitViolation;
  }
  if (!opts.out_dir.empty()) {
    std::ostringstream surf;
    save_surface(surf, u);
    emit(opts, "surface.txt", surf.str(), out);
    std::ostringstream term;
    save_terminal(term, sp.terminal);
    emit(opts, "terminal.txt", term.str(), out);
  }
  return code;
}

int cmd_converge(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  const auto rows = converge_rows(cfg, opts.seed);
  std::ostringstream csv;
  write_convergence_csv(csv, rows, cfg, opts.seed);
  emit(opts, "converge.csv", csv.str(), out);
  int code = kExitOk;
  for (const auto& r : rows) {
    if (!sandwich_holds(r)) {
      log(err, LogLevel::error, "sandwich violated at n = " + std::to_string(r.n));
      code = kExitViolation;
    }
  }
  return code;
}

int cmd_ce(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  require_1d(cfg, "ce");
  const PayoffSpec& f = require_payoff(cfg, "ce");
  const Grid1D grid = region_grid(cfg, 0.0);
  const QuadRule rule = gauss_hermite(cfg.quadrature_order);
  std::ostringstream summary;
  summary << csv_header_comment("ce", cfg, opts.seed) << "n,c_n,max_bracket_width\n";
  for (std::size_t n : cfg.n_list) {
    const auto r = stage("dp", [&] { return certainty_equivalent(f, n, cfg.market, grid, rule, cfg.integration); });
    summary << n << ',' << num(r.c_n) << ',' << num(r.max_bracket_width) << '\n';
    if (!opts.out_dir.empty()) {
      std::ostringstream table;
      table << csv_header_comment("ce", cfg, opts.seed);
      write_cert_equiv_csv(table, r);
      emit(opts, "ce_n" + std::to_string(n) + ".csv", table.str(), out);
    }
  }
  emit(opts, "ce.csv", summary.str(), out);
  return kExitOk;
}

int cmd_hedge_eval(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  const PayoffSpec& f = require_payoff(cfg, "hedge-eval");
  const std::size_t d = cfg.market.dim();
  std::optional<StrategySpec> strategy;
  const char* label = "gradient";
  switch (cfg.strategy.kind) {
    case StrategyConfig::Kind::gradient:
      strategy = StrategySpec::gradient_of(solve_problem(cfg).surface);
      break;
    case StrategyConfig::Kind::zero:
      strategy = StrategySpec::zero(d);
      label = "zero";
      break;
    case StrategyConfig::Kind::constant:
      strategy = StrategySpec::constant(cfg.strategy.gamma);
      label = "constant";
      break;
  }
  const QuadRule rule = gauss_hermite(cfg.quadrature_order);
  std::ostringstream csv;
  csv << csv_header_comment("hedge-eval", cfg, opts.seed)
      << "n,strategy,value_exact,value_mc,mc_stderr,heavy_paths,max_weight_fraction\n";
  for (std::size_t n : cfg.n_list) {
    double exact = std::numeric_limits<double>::quiet_NaN();
    if (d == 1) {
      exact = stage("hedging", [&] { return criterion_exact_1d(f, *strategy, n, cfg.market, region_grid(cfg, 0.0), rule, cfg.integration); });
    }
    const auto est = stage("hedging", [&] {
      const auto batch = simulate_paths(cfg.market, n, cfg.mc_paths, RngStream(opts.seed, mc_stream(n)));
      return criterion_mc(batch, f, *strategy, n);
    });
    csv << n << ',' << label << ',' << num(exact) << ',' << num(est.value) << ',' << num(est.std_err) << ','
        << est.truncation.heavy_paths << ',' << num(est.truncation.max_weight_fraction) << '\n';
  }
  emit(opts, "hedge_eval.csv", csv.str(), out);
  return kExitOk;
}

int cmd_dual(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  require_1d(cfg, "dual");
  const PayoffSpec& f = require_payoff(cfg, "dual");
  int code = kExitOk;

  std::ostringstream pw_csv;
  pw_csv << csv_header_comment("dual", cfg, opts.seed) << "m,value,payoff_part,entropy_part,cycles\n";
  const QuadRule dual_rule = gauss_hermite(cfg.dual_rule_order);
  for (std::size_t m : cfg.pieces) {
    const auto pw = stage("dual", [&] { return optimize_piecewise(f, m, cfg.K, cfg.market.S0, dual_rule, cfg.integration); });
    pw_csv << m << ',' << num(pw.value.value) << ',' << num(pw.value.payoff_part) << ',' << num(pw.value.entropy_part)
           << ',' << pw.cycles << '\n';
    out << "piecewise m=" << m << " value=" << num(pw.value.value) << " specific_entropy=" << num(pw.value.entropy_part)
        << '\n';
  }
  emit(opts, "dual_piecewise.csv", pw_csv.str(), out);

  if (cfg.feedback_paths > 0) {
    const SolvedProblem sp = solve_problem(cfg);
    const auto fb = stage("dual", [&] {
      const ControlField field = extract_control(*sp.surface);
      const PayoffSpec h = PayoffSpec::sampled(sp.terminal.h.axes, sp.terminal.h.values, true);
      return objective_feedback(h, field, cfg.market.S0, cfg.euler_steps, cfg.feedback_paths,
                                RngStream(opts.seed, kFeedbackStream));
    });
    const double diff = fb.value - sp.u0;
    const bool ok = std::abs(diff) <= 3.0 * fb.std_err + 0.01;
    out << "feedback value=" << num(fb.value) << " stderr=" << num(fb.std_err) << " specific_entropy="
        << num(fb.entropy_part) << " u0=" << num(sp.u0) << " diff=" << num(diff) << " ok=" << (ok ? "yes" : "no")
        << '\n';
    if (!ok) {
      log(err, LogLevel::error, "feedback value disagrees with u(0, S0)");
      code = kExitViolation;
    }
  }

  // One-period duality on the slices of the exact recursion for the smallest n.
  const std::size_t n = cfg.n_list.front();
  const Grid1D grid = region_grid(cfg, 0.0);
  const auto ce = stage("dp", [&] {
    return certainty_equivalent(f, n, cfg.market, grid, gauss_hermite(cfg.quadrature_order), cfg.integration);
  });
  const double nn = static_cast<double>(n);
  const double root = std::sqrt(nn);
  const double lambda = cfg.market.b[0] / root;
  std::ostringstream slice_csv;
  slice_csv << csv_header_comment("dual", cfg, opts.seed) << "k,x,lambda,lhs,rhs,gap,gamma_star,sigma_star,nV_k\n";
  double min_gap = std::numeric_limits<double>::infinity();
  double max_gap = -std::numeric_limits<double>::infinity();
  double sum_gap = 0.0;
  std::size_t count = 0;
  const double s0 = cfg.market.S0[0];
  for (std::size_t k = 0; k < n; ++k) {
    const GridFunction next{grid, ce.V[k + 1]};
    for (double x : {s0 - 1.0, s0, s0 + 1.0}) {
      const auto rep = stage("dp", [&] {
        return one_period_dual_check([&](double y) { return nn * next(x + y / root); }, lambda, cfg.K);
      });
      slice_csv << k << ',' << num(x) << ',' << num(lambda) << ',' << num(rep.lhs) << ',' << num(rep.rhs) << ','
                << num(rep.gap) << ',' << num(rep.gamma_star) << ',' << num(rep.sigma_star) << ','
                << num(nn * interpolate(grid, ce.V[k], x)) << '\n';
      min_gap = std::min(min_gap, rep.gap);
      max_gap = std::max(max_gap, rep.gap);
      sum_gap += rep.gap;
      ++count;
    }
  }
  emit(opts, "dual_slices.csv", slice_csv.str(), out);
  out << "slices n=" << n << " count=" << count << " min_gap=" << num(min_gap) << " max_gap=" << num(max_gap)
      << " mean_gap=" << num(sum_gap / static_cast<double>(count)) << '\n';
  if (min_gap < -1e-6) {
    log(err, LogLevel::error, "one-period duality gap is negative");
    code = kExitViolation;
  }
  return code;
}

}  // namespace

int run_command(const std::string& name, const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out,
                std::ostream& err) {
  try {
    log(err, LogLevel::info, "running " + name);
    if (name == "check") return cmd_check(cfg, out);
    if (name == "solve") return cmd_solve(cfg, opts, out, err);
    if (name == "converge") return cmd_converge(cfg, opts, out, err);
    if (name == "dual") return cmd_dual(cfg, opts, out, err);
    if (name == "ce") return cmd_ce(cfg, opts, out);
    if (name == "hedge-eval") return cmd_hedge_eval(cfg, opts, out);
    err << "error: unknown command '" << name << "'\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalFailure& e) {
    err << "numerical failure in " << e.module << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "numerical failure in cli: " << e.what() << '\n';
    return kExitNumerical;
  }
}

int run_command_file(const std::string& name, const std::string& config_path, const CommandOptions& opts,
                     std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  return run_command(name, cfg, opts, out, err);
}

}  // namespace ehedge
