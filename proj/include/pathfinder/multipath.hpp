#ifndef PATHFINDER_MULTIPATH_HPP
#define PATHFINDER_MULTIPATH_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "pathfinder.hpp"
#include "psis.hpp"
#include "random.hpp"
#include "targets.hpp"

namespace pathfinder {

struct multipath_options {
  pathfinder_options single;
  /// I, independent single-path runs.
  int num_paths = 20;
  /// R, draws returned by importance resampling.
  int num_resamples = 100;
  /// Threads across paths; each path scores its candidates serially.
  unsigned workers = 1;

  void validate() const {
    single.validate();
    if (num_paths < 1) throw bad_params("multipath: num_paths must be >= 1");
    if (num_resamples < 1) throw bad_params("multipath: num_resamples must be >= 1");
    if (static_cast<long long>(num_resamples) >
        static_cast<long long>(num_paths) * single.num_draws) {
      throw bad_params("multipath: num_resamples must not exceed num_paths * num_draws");
    }
  }
};

/**
 * Draws pooled from all runs. Every draw is weighted against the component
 * that produced it: with I equally weighted components the 1/I factors of
 * the augmented proposal and target cancel, so
 * log w = log p(phi) - log q_i(phi).
 */
struct weighted_sample {
  Eigen::MatrixXd draws;
  Eigen::VectorXd log_w_raw;
  Eigen::VectorXd log_w_smoothed;
  double k_hat = k_hat_degenerate;
  /// Run index (0-based) each draw came from.
  std::vector<int> component_ids;
};

struct multipath_result {
  /// R resampled draws, one per row.
  Eigen::MatrixXd draws;
  /// Row of `pool` behind each resampled draw.
  std::vector<std::size_t> indices;
  std::vector<int> components;
  weighted_sample pool;
  std::vector<pathfinder_run> runs;
  /// Target evaluations made while scoring the pooled draws.
  std::uint64_t pool_logp_evals = 0;
  std::vector<std::string> warnings;

  double k_hat() const noexcept { return pool.k_hat; }
  std::uint64_t n_logp() const noexcept {
    std::uint64_t total = pool_logp_evals;
    for (const auto& r : runs) total += r.n_logp();
    return total;
  }
  std::uint64_t n_grad() const noexcept {
    std::uint64_t total = 0;
    for (const auto& r : runs) total += r.n_grad();
    return total;
  }
};

/// Log importance weight; -inf unless both densities are finite.
inline double log_importance_weight(double logp, double logq) {
  if (!std::isfinite(logp) || !std::isfinite(logq)) {
    return -std::numeric_limits<double>::infinity();
  }
  return logp - logq;
}

/**
 * Evaluates log p at every draw of every run (stored in run.logp), pools the
 * draws, Pareto-smooths the weights and resamples `num_resamples` of them.
 * Throws all_paths_failed when every run failed.
 */
inline multipath_result pool_and_resample(const log_density_target& target,
                                          std::vector<pathfinder_run> runs,
                                          std::size_t num_resamples, std::uint64_t seed,
                                          unsigned workers = 1) {
  bool any_ok = false;
  for (const auto& r : runs) any_ok = any_ok || !r.failed;
  if (!any_ok) throw all_paths_failed("every Pathfinder run failed");

  multipath_result out;
  parallel_for(runs.size(), workers, [&](std::size_t i) {
    pathfinder_run& r = runs[i];
    r.logp.resize(r.draws.rows());
    for (Eigen::Index m = 0; m < r.draws.rows(); ++m) {
      r.logp[m] = target.log_density(r.draws.row(m).transpose());
    }
  });

  Eigen::Index total = 0;
  for (const auto& r : runs) total += r.draws.rows();
  const Eigen::Index n = target.dim();
  weighted_sample& pool = out.pool;
  pool.draws.resize(total, n);
  pool.log_w_raw.resize(total);
  pool.component_ids.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const pathfinder_run& r = runs[i];
    for (Eigen::Index m = 0; m < r.draws.rows(); ++m, ++row) {
      pool.draws.row(row) = r.draws.row(m);
      pool.log_w_raw[row] = log_importance_weight(r.logp[m], r.logq[m]);
      pool.component_ids.push_back(static_cast<int>(i));
    }
  }
  out.pool_logp_evals = static_cast<std::uint64_t>(total);

  if (!pool.log_w_raw.array().isFinite().any()) {
    throw all_paths_failed("no pooled draw has a finite importance weight");
  }
  psis_result smoothed = psis_smooth(pool.log_w_raw);
  pool.log_w_smoothed = std::move(smoothed.log_w);
  pool.k_hat = smoothed.k_hat;
  if (std::isfinite(pool.k_hat) && pool.k_hat > k_hat_warning_threshold) {
    out.warnings.push_back("Pareto k-hat " + std::to_string(pool.k_hat) + " exceeds " +
                           std::to_string(k_hat_warning_threshold) +
                           "; importance weights are unreliable");
  }

  rng_type rng = make_rng(seed, 0, 0, stream_kind::resample);
  out.indices = resample(pool.log_w_smoothed, num_resamples, rng);
  out.draws.resize(static_cast<Eigen::Index>(num_resamples), n);
  out.components.reserve(num_resamples);
  for (std::size_t r = 0; r < num_resamples; ++r) {
    const auto idx = static_cast<Eigen::Index>(out.indices[r]);
    out.draws.row(static_cast<Eigen::Index>(r)) = pool.draws.row(idx);
    out.components.push_back(pool.component_ids[out.indices[r]]);
  }
  out.runs = std::move(runs);
  return out;
}

/// The I independent single-path runs of run_multi, before pooling.
inline std::vector<pathfinder_run> run_paths(const log_density_target& target,
                                             const multipath_options& opts, std::uint64_t seed) {
  opts.validate();
  pathfinder_options single = opts.single;
  single.workers = 1;
  std::vector<pathfinder_run> runs(static_cast<std::size_t>(opts.num_paths));
  parallel_for(runs.size(), opts.workers, [&](std::size_t i) {
    runs[i] = run_single(target, single, seed, static_cast<std::uint64_t>(i));
  });
  return runs;
}

/// Multi-path Pathfinder: I independent runs (run i uses path index i of
/// the master seed), pooled and importance resampled.
inline multipath_result run_multi(const log_density_target& target,
                                  const multipath_options& opts, std::uint64_t seed) {
  return pool_and_resample(target, run_paths(target, opts, seed),
                           static_cast<std::size_t>(opts.num_resamples), seed, opts.workers);
}

}  // namespace pathfinder

#endif  // PATHFINDER_MULTIPATH_HPP
