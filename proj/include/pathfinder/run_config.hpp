#ifndef PATHFINDER_RUN_CONFIG_HPP
#define PATHFINDER_RUN_CONFIG_HPP

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "multipath.hpp"
#include "pathfinder.hpp"

namespace pathfinder {

/**
 * Fully defaulted, validated run description.
 *
 * Config files are JSON objects with these keys (all optional except
 * "target"):
 *
 *   target, target_params, dim, mode ("single" | "multi"), seed,
 *   history_size, elbo_draws, num_draws, num_paths, num_resamples,
 *   max_iterations, rel_tol, init_radius, c1, c2,
 *   out, diagnostics, workers
 *
 * Unknown keys are rejected. "dim" is folded into target_params.
 */
struct run_config {
  std::string target;
  nlohmann::json target_params = nlohmann::json::object();
  std::string mode = "multi";
  std::uint64_t seed = 0;

  int history_size = 6;
  int elbo_draws = 5;
  int num_draws = 100;
  int num_paths = 20;
  int num_resamples = 100;
  int max_iterations = 1000;
  double rel_tol = 1e-13;
  double init_radius = 2.0;
  double c1 = 1e-4;
  double c2 = 0.9;

  std::optional<std::string> out;
  std::optional<std::string> diagnostics;
  std::optional<unsigned> workers;

  pathfinder_options single_options() const {
    pathfinder_options o;
    o.lbfgs.history_size = history_size;
    o.lbfgs.max_iterations = max_iterations;
    o.lbfgs.rel_tol = rel_tol;
    o.lbfgs.c1 = c1;
    o.lbfgs.c2 = c2;
    o.elbo_draws = elbo_draws;
    o.num_draws = num_draws;
    o.init_radius = init_radius;
    return o;
  }

  multipath_options multipath() const {
    multipath_options o;
    o.single = single_options();
    o.num_paths = num_paths;
    o.num_resamples = num_resamples;
    return o;
  }

  /// Everything that determines the output; excludes file paths and the
  /// worker count, which never change results.
  nlohmann::json to_json() const {
    return nlohmann::json{
        {"target", target},
        {"target_params", target_params},
        {"mode", mode},
        {"seed", seed},
        {"history_size", history_size},
        {"elbo_draws", elbo_draws},
        {"num_draws", num_draws},
        {"num_paths", num_paths},
        {"num_resamples", num_resamples},
        {"max_iterations", max_iterations},
        {"rel_tol", rel_tol},
        {"init_radius", init_radius},
        {"c1", c1},
        {"c2", c2},
    };
  }
};

namespace detail {

inline constexpr std::string_view config_keys[] = {
    "target",        "target_params", "dim",        "mode",          "seed",
    "history_size",  "elbo_draws",    "num_draws",  "num_paths",     "num_resamples",
    "max_iterations", "rel_tol",      "init_radius", "c1",           "c2",
    "out",           "diagnostics",   "workers"};

inline int positive_int(const nlohmann::json& j, const char* key) {
  if (!j.is_number_integer() || j.get<long long>() < 1 ||
      j.get<long long>() > 1'000'000'000LL) {
    throw config_error(key, "must be a positive integer");
  }
  return static_cast<int>(j.get<long long>());
}

inline double real_number(const nlohmann::json& j, const char* key) {
  if (!j.is_number()) throw config_error(key, "must be a number");
  return j.get<double>();
}

inline std::string text(const nlohmann::json& j, const char* key) {
  if (!j.is_string()) throw config_error(key, "must be a string");
  return j.get<std::string>();
}

}  // namespace detail

/// Validates a parsed config object and fills in defaults.
inline run_config validate_config(const nlohmann::json& raw) {
  if (!raw.is_object()) throw config_error("", "configuration must be a JSON object");
  for (const auto& item : raw.items()) {
    if (std::find(std::begin(detail::config_keys), std::end(detail::config_keys),
                  item.key()) == std::end(detail::config_keys)) {
      throw config_error(item.key(), "unknown configuration key");
    }
  }

  run_config c;
  if (!raw.contains("target")) throw config_error("target", "is required");
  c.target = detail::text(raw.at("target"), "target");

  if (raw.contains("target_params")) {
    if (!raw.at("target_params").is_object()) {
      throw config_error("target_params", "must be a JSON object");
    }
    c.target_params = raw.at("target_params");
  }
  if (raw.contains("dim")) {
    const int dim = detail::positive_int(raw.at("dim"), "dim");
    if (c.target_params.contains("dim") && c.target_params.at("dim") != dim) {
      throw config_error("dim", "disagrees with target_params.dim");
    }
    c.target_params["dim"] = dim;
  }

  if (raw.contains("mode")) {
    c.mode = detail::text(raw.at("mode"), "mode");
    if (c.mode != "single" && c.mode != "multi") {
      throw config_error("mode", "must be \"single\" or \"multi\"");
    }
  }
  if (raw.contains("seed")) {
    const auto& s = raw.at("seed");
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
      throw config_error("seed", "must be a non-negative integer");
    }
    c.seed = s.is_number_unsigned() ? s.get<std::uint64_t>()
                                    : static_cast<std::uint64_t>(s.get<std::int64_t>());
  }

  auto set_int = [&](const char* key, int& field) {
    if (raw.contains(key)) field = detail::positive_int(raw.at(key), key);
  };
  set_int("history_size", c.history_size);
  set_int("elbo_draws", c.elbo_draws);
  set_int("num_draws", c.num_draws);
  set_int("num_paths", c.num_paths);
  set_int("num_resamples", c.num_resamples);
  set_int("max_iterations", c.max_iterations);

  auto set_real = [&](const char* key, double& field) {
    if (raw.contains(key)) field = detail::real_number(raw.at(key), key);
  };
  set_real("rel_tol", c.rel_tol);
  set_real("init_radius", c.init_radius);
  set_real("c1", c.c1);
  set_real("c2", c.c2);

  if (!(c.rel_tol > 0.0)) throw config_error("rel_tol", "must be positive");
  if (!(c.init_radius > 0.0) || !std::isfinite(c.init_radius)) {
    throw config_error("init_radius", "must be positive and finite");
  }
  if (!(c.c1 > 0.0 && c.c1 < c.c2 && c.c2 < 1.0)) {
    throw config_error("c1", "Wolfe constants need 0 < c1 < c2 < 1");
  }
  if (static_cast<long long>(c.num_resamples) >
      static_cast<long long>(c.num_paths) * c.num_draws) {
    throw config_error("num_resamples", "must not exceed num_paths * num_draws");
  }

  if (raw.contains("out")) c.out = detail::text(raw.at("out"), "out");
  if (raw.contains("diagnostics")) c.diagnostics = detail::text(raw.at("diagnostics"), "diagnostics");
  if (raw.contains("workers")) {
    c.workers = static_cast<unsigned>(detail::positive_int(raw.at("workers"), "workers"));
  }
  return c;
}

/// Parses UTF-8 JSON text; parse errors name the line and column.
inline run_config validate_config(std::string_view text) {
  nlohmann::json raw;
  try {
    raw = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw config_error("", "invalid JSON at line " + std::to_string(line) + ", column " +
                               std::to_string(column));
  }
  return validate_config(raw);
}

}  // namespace pathfinder

#endif  // PATHFINDER_RUN_CONFIG_HPP
