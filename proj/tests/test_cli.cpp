#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "entropic_hedge/commands.hpp"
#include "entropic_hedge/config.hpp"
#include "entropic_hedge/core.hpp"

using namespace ehedge;

namespace {

std::string config_path(const std::string& name) { return std::string(EH_SOURCE_DIR) + "/configs/" + name + ".json"; }

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_file(const std::string& cmd, const std::string& name, std::uint64_t seed = 0) {
  std::ostringstream out;
  std::ostringstream err;
  CommandOptions opts;
  opts.seed = seed;
  const int code = run_command_file(cmd, config_path(name), opts, out, err);
  return {code, out.str(), err.str()};
}

Run run_text(const std::string& cmd, const std::string& json) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_command(cmd, parse_config(json), CommandOptions{}, out, err);
  return {code, out.str(), err.str()};
}

double field(const std::string& line, const std::string& key) {
  const auto at = line.find(key + "=");
  REQUIRE(at != std::string::npos);
  return std::stod(line.substr(at + key.size() + 1));
}

// CSV rows after the comment and header lines
std::vector<std::vector<double>> csv_rows(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') {
      header = false;
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(R"({"payoff": {"type": "put", "K": 1.0, "a": [1.0]}, "n": [2, 4]})");
  CHECK(cfg.payoff.has_value());
  CHECK(cfg.n_list == std::vector<std::size_t>{2, 4});
  CHECK(cfg.integration == Integration::piecewise_exact);
  const auto gh = parse_config(R"({"payoff": {"type": "put", "K": 1.0, "a": [1.0]}, "integration": "gauss_hermite"})");
  CHECK(gh.integration == Integration::gauss_hermite);
  CHECK(gh.hash != cfg.hash);
  CHECK_THROWS_AS(parse_config(R"({"payoff": {"type": "put", "K": 1.0, "a": [1.0]}, "integration": "simpson"})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"payoff": {"type": "put", "K": 1.0, "a": [1.0]}, "colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"payoff": {"type": "put", "K": 1.0, "a": [1.0], "strike": 2}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"payoff": {"type": "put", "K": 1.0, "a": [1.0]}, "n": [4, 2]})"), ConfigError);
  try {
    parse_config("{\n  \"n\": [1,\n  2,, 3]\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    CHECK(std::string(e.what()).find("column") != std::string::npos);
  }
}

TEST_CASE("check command") {
  CHECK(run_file("check", "put").code == kExitOk);
  const auto unbounded = run_file("check", "unbounded");
  CHECK(unbounded.code == kExitViolation);
  CHECK(unbounded.out.find("kind=unbounded") != std::string::npos);
  const auto bad = run_file("check", "malformed");
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("line 3, column") != std::string::npos);
  CHECK(run_file("check", "does_not_exist").code == kExitUsage);
  CHECK(run_file("bogus", "put").code == kExitUsage);
}

TEST_CASE("solve command") {
  const auto c = run_file("solve", "constant");
  CHECK(c.code == kExitOk);
  CHECK(field(c.out, "u0") == doctest::Approx(0.3).epsilon(1e-14));
  const auto q = run_file("solve", "quadratic");
  CHECK(q.code == kExitOk);
  CHECK(field(q.out, "u0") == doctest::Approx(-0.5 * std::log(0.5)).epsilon(1e-10));
  CHECK(q.out.find("ok=yes") != std::string::npos);
  CHECK(field(q.out, "oracle_error") <= 1e-10);
}

TEST_CASE("solve command matches the put fixture") {
  std::ifstream in(std::string(EH_SOURCE_DIR) + "/tests/fixtures/put_solve.txt");
  std::string frozen;
  std::getline(in, frozen);
  const auto r = run_file("solve", "put");
  REQUIRE(r.code == kExitOk);
  std::istringstream fields(frozen.substr(frozen.find(' ') + 1));
  std::string kv;
  while (fields >> kv) {
    const std::string key = kv.substr(0, kv.find('='));
    CHECK_MESSAGE(field(r.out, key) == doctest::Approx(field(kv, key)).epsilon(1e-9), key);
  }
}

TEST_CASE("converge command on linear payoffs") {
  const auto flat = run_text("converge", R"({
    "payoff": {"type": "linear_adjusted", "c0": 0.0, "c": [1.0], "base": {"type": "constant", "c": 0.0}},
    "market": {"S0": [1.0], "b": [0.0]}, "grid": {"dx": 0.03125, "half_width": 6.0}, "n": [1, 2],
    "mc": {"paths": 2000}, "dual": {"converge_pieces": 1}})");
  REQUIRE(flat.code == kExitOk);
  const auto rows = csv_rows(flat.out);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    // c_n, lower_bound, strategy_value_exact, strategy_value_mc, limit_u0
    for (int col : {1, 2, 3, 4, 6}) CHECK(r[col] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.back() == 1.0);
  }

  const auto drift = run_file("converge", "linear");
  REQUIRE(drift.code == kExitOk);
  CHECK(drift.out.find("integration=piecewise_exact") != std::string::npos);
  for (const auto& r : csv_rows(drift.out)) CHECK(std::abs(r[1] - (1.0 - 0.25 / (2.0 * r[0]))) <= 1e-6);
}

TEST_CASE("dual command") {
  const auto c = run_file("dual", "constant");
  CHECK(c.code == kExitOk);
  const auto csv = c.out.find("# entropic-hedge");
  const auto piecewise = csv_rows(c.out.substr(csv, c.out.find("feedback") - csv));
  CHECK(piecewise.size() == 2);
  for (const auto& r : piecewise) CHECK(r[1] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(field(c.out, "feedback value") == doctest::Approx(0.3).epsilon(1e-10));

  std::ostringstream values;
  // payoff and recursion grids at 1/64 keep the interpolation sawtooth below the slice tolerance
  for (int i = 0; i <= 2048; ++i) {
    const double x = -16.0 + i / 64.0;
    values << (i ? "," : "") << 0.25 * x * x;
  }
  const auto q = run_text("dual", R"({"payoff": {"type": "sampled", "axes": [{"lo": -16, "hi": 16, "count": 2049}],
    "declared_bounded": true, "values": [)" + values.str() + R"(]}, "n": [2], "grid": {"dx": 0.015625},
    "dual": {"pieces": [1], "K": 4, "feedback_paths": 0}})");
  REQUIRE(q.code == kExitOk);
  CHECK(field(q.out, "piecewise m=1 value") == doctest::Approx(0.346574).epsilon(1e-4));
  CHECK(field(q.out, "min_gap") >= -1e-6);
}

TEST_CASE("commands are deterministic") {
  const auto a = run_file("converge", "constant", 7);
  const auto b = run_file("converge", "constant", 7);
  CHECK(a.out == b.out);
  set_worker_threads(3);
  const auto c = run_file("converge", "constant", 7);
  set_worker_threads(1);
  CHECK(a.out == c.out);
  CHECK(a.out.find("seed=7") != std::string::npos);
}
