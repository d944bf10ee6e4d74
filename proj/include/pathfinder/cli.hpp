#ifndef PATHFINDER_CLI_HPP
#define PATHFINDER_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "multipath.hpp"
#include "pathfinder.hpp"
#include "run_config.hpp"
#include "targets.hpp"

namespace pathfinder {

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Header param.1..param.N, then one row per draw.
inline void write_draws_csv(std::ostream& os, const Eigen::MatrixXd& draws) {
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    os << (j == 0 ? "" : ",") << "param." << (j + 1);
  }
  os << '\n';
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
      os << (j == 0 ? "" : ",") << format_double(draws(i, j));
    }
    os << '\n';
  }
}

/// Per-path diagnostics. ELBO values of -inf serialize as null.
inline nlohmann::json run_to_json(const pathfinder_run& r, std::size_t index) {
  nlohmann::json trace = nlohmann::json::array();
  for (double v : r.elbo_trace) {
    trace.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
  }
  return nlohmann::json{
      {"path", index},
      {"failed", r.failed},
      {"l_star", r.l_star},
      {"iterations", r.iterations},
      {"termination", std::string(to_string(r.reason))},
      {"elbo_trace", std::move(trace)},
      {"scored_candidates", r.scored_candidates},
      {"lbfgs_logp_evals", r.lbfgs_logp_evals},
      {"lbfgs_grad_evals", r.lbfgs_grad_evals},
      {"elbo_logp_evals", r.elbo_logp_evals},
      {"n_logp", r.n_logp()},
      {"n_grad", r.n_grad()},
  };
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("config", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline unsigned workers_from_env() {
  const char* env = std::getenv("PATHFINDER_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  unsigned value = 0;
  const char* end = env + std::char_traits<char>::length(env);
  const auto res = std::from_chars(env, end, value);
  if (res.ec != std::errc() || res.ptr != end || value < 1) {
    throw config_error("PATHFINDER_WORKERS", "must be a positive integer");
  }
  return value;
}

inline void write_text(const std::optional<std::string>& path, std::ostream& fallback,
                       const std::string& text) {
  if (!path) {
    fallback << text;
    return;
  }
  std::ofstream f(*path, std::ios::binary);
  if (!f) throw config_error("out", "cannot write '" + *path + "'");
  f << text;
}

}  // namespace detail

/**
 * The `run` command. `args` excludes the program name.
 *
 * Exit codes: 0 success, 1 when every path failed (or the single path
 * failed), 2 on a configuration error. Draws go to --out (stdout if absent),
 * diagnostics JSON to --diagnostics.
 */
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Approximate posterior sampling along quasi-Newton paths", "pathfinder"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Run single- or multi-path Pathfinder");

  std::string config_path, target, mode, target_params, out_path, diag_path;
  std::string seed_text;
  int dim = 0, history = 0, elbo_draws = 0, num_draws = 0, paths = 0, resamples = 0, max_iters = 0;
  unsigned workers = 0;
  double rel_tol = 0, init_radius = 0, c1 = 0, c2 = 0;
  bool timing = false;

  run->add_option("--config", config_path, "JSON config file; flags override its values");
  auto* o_target = run->add_option("--target", target, "Target name");
  auto* o_params = run->add_option("--target-params", target_params, "Target parameters as a JSON object");
  auto* o_dim = run->add_option("--dim", dim, "Target dimension");
  auto* o_mode = run->add_option("--mode", mode, "single or multi");
  auto* o_seed = run->add_option("--seed", seed_text, "Master seed (non-negative 64-bit integer)");
  auto* o_out = run->add_option("--out", out_path, "CSV file for draws (default stdout)");
  auto* o_diag = run->add_option("--diagnostics", diag_path, "JSON file for diagnostics");
  auto* o_workers = run->add_option("--workers", workers, "Worker threads (env PATHFINDER_WORKERS)");
  auto* o_hist = run->add_option("--history-size", history, "L-BFGS history size J");
  auto* o_rel = run->add_option("--rel-tol", rel_tol, "Relative tolerance on log density");
  auto* o_iters = run->add_option("--max-iters", max_iters, "Maximum L-BFGS iterations L");
  auto* o_k = run->add_option("--elbo-draws", elbo_draws, "Draws per ELBO estimate K");
  auto* o_m = run->add_option("--draws", num_draws, "Draws per path M");
  auto* o_i = run->add_option("--paths", paths, "Number of paths I");
  auto* o_r = run->add_option("--resamples", resamples, "Importance resamples R");
  auto* o_init = run->add_option("--init-radius", init_radius, "Initial points uniform in (-r, r)");
  auto* o_c1 = run->add_option("--c1", c1, "Sufficient-increase constant");
  auto* o_c2 = run->add_option("--c2", c2, "Curvature constant");
  run->add_flag("--timing", timing, "Add wall time to diagnostics (breaks byte-identical output)");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const auto started = std::chrono::steady_clock::now();
  run_config cfg;
  std::unique_ptr<log_density_target> density;
  unsigned n_workers = 1;
  try {
    nlohmann::json raw = nlohmann::json::object();
    if (!config_path.empty()) {
      const std::string text = detail::read_file(config_path);
      raw = nlohmann::json::parse(text, nullptr, false);
      // Re-parse through validate_config to report the error position.
      if (raw.is_discarded()) (void)validate_config(std::string_view(text));
      if (!raw.is_object()) throw config_error("", "configuration must be a JSON object");
    }
    if (*o_target) raw["target"] = target;
    if (*o_params) {
      const auto parsed = nlohmann::json::parse(target_params, nullptr, false);
      if (parsed.is_discarded()) throw config_error("target_params", "is not valid JSON");
      raw["target_params"] = parsed;
    }
    if (*o_dim) raw["dim"] = dim;
    if (*o_mode) raw["mode"] = mode;
    if (*o_seed) {
      std::uint64_t seed = 0;
      const char* b = seed_text.data();
      const char* e = b + seed_text.size();
      const auto res = std::from_chars(b, e, seed);
      if (res.ec != std::errc() || res.ptr != e) {
        throw config_error("seed", "must be a non-negative integer");
      }
      raw["seed"] = seed;
    }
    if (*o_out) raw["out"] = out_path;
    if (*o_diag) raw["diagnostics"] = diag_path;
    if (*o_workers) raw["workers"] = workers;
    if (*o_hist) raw["history_size"] = history;
    if (*o_rel) raw["rel_tol"] = rel_tol;
    if (*o_iters) raw["max_iterations"] = max_iters;
    if (*o_k) raw["elbo_draws"] = elbo_draws;
    if (*o_m) raw["num_draws"] = num_draws;
    if (*o_i) raw["num_paths"] = paths;
    if (*o_r) raw["num_resamples"] = resamples;
    if (*o_init) raw["init_radius"] = init_radius;
    if (*o_c1) raw["c1"] = c1;
    if (*o_c2) raw["c2"] = c2;

    cfg = validate_config(raw);
    n_workers = cfg.workers ? *cfg.workers : detail::workers_from_env();
    density = make_target(cfg.target, cfg.target_params);
  } catch (const unknown_target& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return 2;
  }

  nlohmann::json diag;
  diag["config"] = cfg.to_json();
  diag["warnings"] = nlohmann::json::array();
  int status = 0;
  Eigen::MatrixXd draws(0, density->dim());

  try {
    if (cfg.mode == "single") {
      pathfinder_options opts = cfg.single_options();
      opts.workers = n_workers;
      const pathfinder_run r = run_single(*density, opts, cfg.seed, 0);
      draws = r.draws;
      diag["paths"] = nlohmann::json::array({run_to_json(r, 0)});
      diag["k_hat"] = nullptr;
      diag["counters"] = {{"n_logp", r.n_logp()},
                          {"n_grad", r.n_grad()},
                          {"pool_logp_evals", 0},
                          {"target_logp_evals", density->logp_evals()},
                          {"target_grad_evals", density->grad_evals()}};
      if (r.failed) {
        diag["warnings"].push_back("the path failed; output is the last iterate with log q = +inf");
        status = 1;
      }
    } else {
      multipath_options opts = cfg.multipath();
      opts.workers = n_workers;
      std::vector<pathfinder_run> runs = run_paths(*density, opts, cfg.seed);
      nlohmann::json per_path = nlohmann::json::array();
      std::uint64_t n_logp = 0, n_grad = 0;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        per_path.push_back(run_to_json(runs[i], i));
        n_logp += runs[i].n_logp();
        n_grad += runs[i].n_grad();
      }
      diag["paths"] = std::move(per_path);
      std::uint64_t pool_evals = 0;
      try {
        multipath_result res = pool_and_resample(
            *density, std::move(runs), static_cast<std::size_t>(cfg.num_resamples), cfg.seed,
            n_workers);
        draws = std::move(res.draws);
        pool_evals = res.pool_logp_evals;
        diag["k_hat"] = std::isfinite(res.k_hat()) ? nlohmann::json(res.k_hat()) : nlohmann::json(nullptr);
        for (auto& w : res.warnings) diag["warnings"].push_back(w);
      } catch (const all_paths_failed& e) {
        diag["k_hat"] = nullptr;
        diag["warnings"].push_back(e.what());
        err << "error: " << e.what() << '\n';
        status = 1;
      }
      diag["counters"] = {{"n_logp", n_logp + pool_evals},
                          {"n_grad", n_grad},
                          {"pool_logp_evals", pool_evals},
                          {"target_logp_evals", density->logp_evals()},
                          {"target_grad_evals", density->grad_evals()}};
    }
  } catch (const error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  diag["status"] = status == 0 ? "ok" : "failed";
  diag["num_draws_written"] = draws.rows();
  if (timing) {
    diag["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }

  try {
    std::ostringstream csv;
    write_draws_csv(csv, draws);
    detail::write_text(cfg.out, out, csv.str());
    if (cfg.diagnostics) {
      std::optional<std::string> path = cfg.diagnostics;
      detail::write_text(path, out, diag.dump(2) + "\n");
    }
  } catch (const error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}

}  // namespace pathfinder

#endif  // PATHFINDER_CLI_HPP
