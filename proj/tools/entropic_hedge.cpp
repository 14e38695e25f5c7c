#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "entropic_hedge/commands.hpp"
#include "entropic_hedge/core.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scaling limits of exponential hedging in the Bachelier model"};
  app.set_version_flag("--version", ehedge::kVersion);
  app.require_subcommand(1, 1);

  std::string config_path;
  ehedge::CommandOptions opts;
  unsigned threads = 0;

  const char* commands[][2] = {
      {"check", "Probe the payoff against the boundedness/curvature assumption"},
      {"solve", "Build the smoothed terminal and solve the HJB equation"},
      {"converge", "Convergence table of certainty equivalents, strategy values and bounds"},
      {"dual", "Piecewise dual bounds, feedback verification and one-period duality"},
      {"ce", "Exact finite-n certainty equivalents by dynamic programming"},
      {"hedge-eval", "Evaluate a hedging strategy exactly and by Monte Carlo"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--seed", opts.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", opts.out_dir, "Output directory for CSV and surface files");
    sub->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ehedge::kExitUsage;
  }

  ehedge::set_worker_threads(threads > 0 ? threads : std::thread::hardware_concurrency());
  const std::string name = app.get_subcommands().front()->get_name();
  return ehedge::run_command_file(name, config_path, opts, std::cout, std::cerr);
}
