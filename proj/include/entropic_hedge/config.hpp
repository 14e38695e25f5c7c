#pragma once

// JSON experiment configuration. Unknown keys are rejected at every level.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropic_hedge/hedging.hpp"
#include "entropic_hedge/hjb.hpp"
#include "entropic_hedge/payoffs.hpp"

namespace ehedge {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TerminalConfig {
  enum class Kind { envelope, quadratic, file };
  Kind kind = Kind::envelope;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::string path;
};

struct StrategyConfig {
  enum class Kind { gradient, zero, constant };
  Kind kind = Kind::gradient;
  std::vector<double> gamma;
};

struct ExperimentConfig {
  std::optional<PayoffSpec> payoff;
  TerminalConfig terminal;
  MarketSpec market{{0.0}, {0.0}};
  double epsilon = 0.05;
  double dx = 1.0 / 64.0;
  double half_width = 8.0;
  std::size_t snapshots = 1024;
  BoundaryMode boundary = BoundaryMode::curvature_copy;
  std::vector<std::size_t> n_list{4, 8, 16, 32, 64};
  int quadrature_order = 64;
  Integration integration = Integration::piecewise_exact;
  int terminal_rule_order = 64;
  std::size_t mc_paths = 100000;
  double K = 100.0;
  std::vector<std::size_t> pieces{1, 2, 4};
  std::size_t converge_pieces = 4;
  int dual_rule_order = 128;
  std::size_t feedback_paths = 100000;  // 0 skips the feedback run
  std::size_t euler_steps = 256;
  double check_alpha = 0.5;
  double probe_step = 1.0 / 16.0;
  StrategyConfig strategy;

  std::string canonical;  // normalised JSON dump of the input document
  std::uint64_t hash = 0; // FNV-1a of `canonical`
};

/// Throws ConfigError; parse errors carry "line L, column C".
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

std::uint64_t fnv1a(const std::string& text);

}  // namespace ehedge
