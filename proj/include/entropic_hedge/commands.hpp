#pragma once

// Experiment pipelines behind the entropic-hedge subcommands.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropic_hedge/config.hpp"
#include "entropic_hedge/envelope.hpp"
#include "entropic_hedge/hjb.hpp"

namespace ehedge {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitViolation = 1, kExitUsage = 2, kExitNumerical = 3 };

/// Error raised inside a pipeline stage, tagged with the module that failed.
struct NumericalFailure : std::runtime_error {
  NumericalFailure(std::string module, const std::string& what);
  std::string module;
};

enum class LogLevel { error = 0, info = 1, debug = 2 };
/// From ENTROPIC_HEDGE_LOG (default error). Unknown values fall back to error.
LogLevel log_level();

struct SolvedProblem {
  SmoothTerminal terminal;
  std::shared_ptr<const ValueSurface> surface;
  double u0 = 0.0;
  std::size_t n_t = 0;
  std::optional<double> oracle_error;  // quadratic terminals only
};

/// envelope -> hjb pipeline. The terminal grid covers S0 +- half_width plus a
/// padding of 6 / sqrt(alpha) (rebuilt once alpha is known).
SolvedProblem solve_problem(const ExperimentConfig& cfg);

struct ConvergenceRow {
  std::size_t n = 0;
  double c_n = 0.0;
  double lower_bound = 0.0;  // piecewise dual value - |b|^2 / (2n)
  double strategy_value_exact = 0.0;
  double strategy_value_mc = 0.0;
  double mc_stderr = 0.0;
  double limit_u0 = 0.0;
  double dual_value = 0.0;
  double dual_entropy = 0.0;
  double drift_term = 0.0;  // |b|^2 / (2n)

  double gap_upper() const { return strategy_value_exact - limit_u0; }
  double gap_lower() const { return limit_u0 - (lower_bound + drift_term); }
};

/// lower_bound <= c_n + tol <= strategy_value_exact + 2 tol.
bool sandwich_holds(const ConvergenceRow& row, double tol = 1e-6);

std::vector<ConvergenceRow> converge_rows(const ExperimentConfig& cfg, std::uint64_t seed);

/// "# entropic-hedge <version> command=<name> config_hash=<hex> seed=<seed>"
std::string csv_header_comment(const std::string& command, const ExperimentConfig& cfg, std::uint64_t seed);

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows, const ExperimentConfig& cfg,
                           std::uint64_t seed);

struct CommandOptions {
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: CSV goes to `out`
};

/// Runs one subcommand and returns its exit code. Summary lines go to `out`,
/// diagnostics to `err`.
int run_command(const std::string& name, const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out,
                std::ostream& err);

/// Loads the config (exit 2 on config errors) and runs the subcommand.
int run_command_file(const std::string& name, const std::string& config_path, const CommandOptions& opts,
                     std::ostream& out, std::ostream& err);

}  // namespace ehedge
