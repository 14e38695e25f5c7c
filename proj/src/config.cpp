#include "entropic_hedge/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ehedge {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

double number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

std::size_t count_or(const json& obj, const char* key, std::size_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

std::vector<double> numbers(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::size_t> counts(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(where + "." + key + ": expected a non-empty array of integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 1) {
      throw ConfigError(where + "." + key + ": entries must be positive integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::string text(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string()) throw ConfigError(where + ": missing string '" + key + "'");
  return obj.at(key).get<std::string>();
}

PayoffSpec parse_payoff(const json& j, const std::string& where) {
  const std::string type = text(j, "type", where);
  try {
    if (type == "put") {
      allow_keys(j, where, {"type", "K", "a"});
      return PayoffSpec::put(number(j, "K", where), numbers(j, "a", where));
    }
    if (type == "truncated_call") {
      allow_keys(j, where, {"type", "K1", "K2", "a"});
      return PayoffSpec::truncated_call(number(j, "K1", where), number(j, "K2", where), numbers(j, "a", where));
    }
    if (type == "barrier") {
      allow_keys(j, where, {"type", "inner", "K"});
      if (!j.contains("inner")) throw ConfigError(where + ": missing 'inner'");
      return PayoffSpec::barrier(parse_payoff(j.at("inner"), where + ".inner"), number(j, "K", where));
    }
    if (type == "linear_adjusted") {
      allow_keys(j, where, {"type", "c0", "c", "base"});
      if (!j.contains("base")) throw ConfigError(where + ": missing 'base'");
      return PayoffSpec::linear_adjusted(number(j, "c0", where), numbers(j, "c", where),
                                         parse_payoff(j.at("base"), where + ".base"));
    }
    if (type == "constant") {
      allow_keys(j, where, {"type", "c", "dim"});
      return constant_payoff(number(j, "c", where), count_or(j, "dim", 1, where));
    }
    if (type == "sampled") {
      allow_keys(j, where, {"type", "axes", "values", "declared_bounded"});
      if (!j.contains("axes") || !j.at("axes").is_array()) throw ConfigError(where + ": missing 'axes' array");
      std::vector<Grid1D> axes;
      for (const auto& a : j.at("axes")) {
        allow_keys(a, where + ".axes[]", {"lo", "hi", "count"});
        axes.emplace_back(number(a, "lo", where), number(a, "hi", where), count_or(a, "count", 0, where));
      }
      bool bounded = false;
      if (j.contains("declared_bounded")) {
        if (!j.at("declared_bounded").is_boolean()) throw ConfigError(where + ".declared_bounded: expected a boolean");
        bounded = j.at("declared_bounded").get<bool>();
      }
      return PayoffSpec::sampled(std::move(axes), numbers(j, "values", where), bounded);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown payoff type '" + type + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::string& input, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(input);
  } catch (const json::parse_error& e) {
    // what() reads "[json.exception.parse_error.101] parse error at line L, column C: ..."
    const std::string what = e.what();
    const auto at = what.find("parse error");
    throw ConfigError("config " + (at == std::string::npos ? what : what.substr(at)));
  }
  const std::string root = "config";
  allow_keys(doc, root,
             {"payoff", "terminal", "market", "epsilon", "grid", "hjb", "n", "quadrature_order", "integration", "mc", "dual", "check",
              "strategy"});
  ExperimentConfig cfg;
  if (doc.contains("payoff")) cfg.payoff = parse_payoff(doc.at("payoff"), "payoff");

  if (doc.contains("terminal")) {
    const auto& t = doc.at("terminal");
    const std::string type = text(t, "type", "terminal");
    if (type == "envelope") {
      allow_keys(t, "terminal", {"type", "rule_order"});
      cfg.terminal.kind = TerminalConfig::Kind::envelope;
      cfg.terminal_rule_order = static_cast<int>(count_or(t, "rule_order", 64, "terminal"));
    } else if (type == "quadratic") {
      allow_keys(t, "terminal", {"type", "a", "b", "c"});
      cfg.terminal.kind = TerminalConfig::Kind::quadratic;
      cfg.terminal.a = number(t, "a", "terminal");
      cfg.terminal.b = number_or(t, "b", 0.0, "terminal");
      cfg.terminal.c = number_or(t, "c", 0.0, "terminal");
      if (!(cfg.terminal.a < 1.0)) throw ConfigError("terminal.a: must be < 1");
    } else if (type == "file") {
      allow_keys(t, "terminal", {"type", "path"});
      cfg.terminal.kind = TerminalConfig::Kind::file;
      std::filesystem::path p(text(t, "path", "terminal"));
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      if (!std::filesystem::exists(p)) throw ConfigError("terminal.path: file not found: " + p.string());
      cfg.terminal.path = p.string();
    } else {
      throw ConfigError("terminal: unknown type '" + type + "'");
    }
  }

  if (doc.contains("market")) {
    const auto& m = doc.at("market");
    allow_keys(m, "market", {"S0", "b"});
    try {
      cfg.market = MarketSpec(numbers(m, "S0", "market"), numbers(m, "b", "market"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("market: ") + e.what());
    }
  }
  if (cfg.payoff && cfg.payoff->dim() != cfg.market.dim()) {
    throw ConfigError("payoff dimension does not match market.S0");
  }

  cfg.epsilon = number_or(doc, "epsilon", cfg.epsilon, root);
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon: must be > 0");

  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    allow_keys(g, "grid", {"dx", "half_width"});
    cfg.dx = number_or(g, "dx", cfg.dx, "grid");
    cfg.half_width = number_or(g, "half_width", cfg.half_width, "grid");
  }
  if (!(cfg.dx > 0.0) || !(cfg.half_width > 0.0) || cfg.half_width < 8.0 * cfg.dx) {
    throw ConfigError("grid: need dx > 0 and half_width >= 8 dx");
  }

  if (doc.contains("hjb")) {
    const auto& h = doc.at("hjb");
    allow_keys(h, "hjb", {"snapshots", "boundary"});
    cfg.snapshots = count_or(h, "snapshots", cfg.snapshots, "hjb");
    if (h.contains("boundary")) {
      const std::string bc = text(h, "boundary", "hjb");
      if (bc == "curvature_copy") {
        cfg.boundary = BoundaryMode::curvature_copy;
      } else if (bc == "zero_curvature") {
        cfg.boundary = BoundaryMode::zero_curvature;
      } else {
        throw ConfigError("hjb.boundary: expected curvature_copy or zero_curvature");
      }
    }
  }
  if (cfg.snapshots == 0) throw ConfigError("hjb.snapshots: must be > 0");

  if (doc.contains("n")) cfg.n_list = counts(doc, "n", root);
  for (std::size_t i = 1; i < cfg.n_list.size(); ++i) {
    if (cfg.n_list[i] <= cfg.n_list[i - 1]) throw ConfigError("n: list must be strictly increasing");
  }
  for (std::size_t n : cfg.n_list) {
    if (cfg.snapshots % n != 0) {
      throw ConfigError("n: every n must divide hjb.snapshots (" + std::to_string(cfg.snapshots) + ")");
    }
  }

  cfg.quadrature_order = static_cast<int>(count_or(doc, "quadrature_order", 64, root));
  if (cfg.quadrature_order < 32 || cfg.quadrature_order > 256) throw ConfigError("quadrature_order: must lie in [32, 256]");
  if (doc.contains("integration")) {
    const std::string m = text(doc, "integration", root);
    if (m == "piecewise_exact") {
      cfg.integration = Integration::piecewise_exact;
    } else if (m == "gauss_hermite") {
      cfg.integration = Integration::gauss_hermite;
    } else {
      throw ConfigError("integration: expected piecewise_exact or gauss_hermite, got '" + m + "'");
    }
  }
  if (cfg.terminal_rule_order < 16 || cfg.terminal_rule_order > 256) {
    throw ConfigError("terminal.rule_order: must lie in [16, 256]");
  }

  if (doc.contains("mc")) {
    const auto& m = doc.at("mc");
    allow_keys(m, "mc", {"paths"});
    cfg.mc_paths = count_or(m, "paths", cfg.mc_paths, "mc");
  }
  if (cfg.mc_paths < 2) throw ConfigError("mc.paths: need at least 2 paths");

  if (doc.contains("dual")) {
    const auto& d = doc.at("dual");
    allow_keys(d, "dual", {"K", "pieces", "converge_pieces", "rule_order", "feedback_paths", "euler_steps"});
    cfg.K = number_or(d, "K", cfg.K, "dual");
    if (d.contains("pieces")) cfg.pieces = counts(d, "pieces", "dual");
    cfg.converge_pieces = count_or(d, "converge_pieces", cfg.converge_pieces, "dual");
    cfg.dual_rule_order = static_cast<int>(count_or(d, "rule_order", 128, "dual"));
    cfg.feedback_paths = count_or(d, "feedback_paths", cfg.feedback_paths, "dual");
    cfg.euler_steps = count_or(d, "euler_steps", cfg.euler_steps, "dual");
  }
  if (!(cfg.K >= 1.0 && cfg.K <= 100.0)) throw ConfigError("dual.K: must lie in [1, 100]");
  for (std::size_t m : cfg.pieces)
    if (m > 8) throw ConfigError("dual.pieces: at most 8 pieces");
  if (cfg.converge_pieces < 1 || cfg.converge_pieces > 8) throw ConfigError("dual.converge_pieces: must lie in [1, 8]");
  if (cfg.dual_rule_order < 2 || cfg.dual_rule_order > 256) throw ConfigError("dual.rule_order: must lie in [2, 256]");
  if (cfg.euler_steps < 64) throw ConfigError("dual.euler_steps: must be >= 64");
  if (cfg.feedback_paths == 1) throw ConfigError("dual.feedback_paths: need 0 (skip) or at least 2 paths");

  if (doc.contains("check")) {
    const auto& c = doc.at("check");
    allow_keys(c, "check", {"alpha", "probe_step"});
    cfg.check_alpha = number_or(c, "alpha", cfg.check_alpha, "check");
    cfg.probe_step = number_or(c, "probe_step", cfg.probe_step, "check");
  }
  if (!(cfg.check_alpha > 0.0 && cfg.check_alpha <= 1.0)) throw ConfigError("check.alpha: must lie in (0, 1]");
  if (!(cfg.probe_step > 0.0)) throw ConfigError("check.probe_step: must be > 0");

  if (doc.contains("strategy")) {
    const auto& s = doc.at("strategy");
    const std::string type = text(s, "type", "strategy");
    if (type == "gradient") {
      allow_keys(s, "strategy", {"type"});
      cfg.strategy.kind = StrategyConfig::Kind::gradient;
    } else if (type == "zero") {
      allow_keys(s, "strategy", {"type"});
      cfg.strategy.kind = StrategyConfig::Kind::zero;
    } else if (type == "constant") {
      allow_keys(s, "strategy", {"type", "gamma"});
      cfg.strategy.kind = StrategyConfig::Kind::constant;
      cfg.strategy.gamma = numbers(s, "gamma", "strategy");
      if (cfg.strategy.gamma.size() != cfg.market.dim()) throw ConfigError("strategy.gamma: dimension mismatch");
    } else {
      throw ConfigError("strategy: unknown type '" + type + "'");
    }
  }

  cfg.canonical = doc.dump();
  cfg.hash = fnv1a(cfg.canonical);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(buf.str(), dir.empty() ? "." : dir.string());
}

}  // namespace ehedge
