#ifndef PATHFINDER_PATHFINDER_HPP
#define PATHFINDER_PATHFINDER_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "elbo.hpp"
#include "errors.hpp"
#include "inv_hessian.hpp"
#include "lbfgs.hpp"
#include "normal_approx.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "targets.hpp"

namespace pathfinder {

struct pathfinder_options {
  /// history_size (J), rel_tol, max_iterations and the line-search constants.
  lbfgs_options lbfgs;
  /// K, Monte Carlo draws per ELBO estimate.
  int elbo_draws = 5;
  /// M, draws returned from the selected approximation.
  int num_draws = 100;
  /// Initial point ~ uniform(-init_radius, init_radius)^N.
  double init_radius = 2.0;
  /// Threads used to score candidates along the path.
  unsigned workers = 1;

  void validate() const {
    lbfgs.validate();
    if (elbo_draws < 1) throw bad_params("pathfinder: elbo_draws must be >= 1");
    if (num_draws < 1) throw bad_params("pathfinder: num_draws must be >= 1");
    if (!(init_radius > 0.0) || !std::isfinite(init_radius)) {
      throw bad_params("pathfinder: init_radius must be positive");
    }
  }
};

/**
 * Output of one Pathfinder path.
 *
 * A failed run (no iterations, or no candidate with a finite ELBO) carries a
 * single draw, the last point of the trajectory, with log q = +inf so that it
 * receives zero importance weight when pooled.
 */
struct pathfinder_run {
  Eigen::MatrixXd draws;
  Eigen::VectorXd logq;
  /// Target log density at each draw; filled in when runs are pooled.
  Eigen::VectorXd logp;
  /// ELBO of the approximation at iteration l is elbo_trace[l - 1].
  std::vector<double> elbo_trace;
  /// Selected iteration (1-based); 0 for a failed run.
  std::size_t l_star = 0;
  bool failed = false;

  std::uint64_t lbfgs_logp_evals = 0;
  std::uint64_t lbfgs_grad_evals = 0;
  std::uint64_t elbo_logp_evals = 0;
  std::size_t scored_candidates = 0;

  std::size_t iterations = 0;
  termination reason = termination::converged;
  Eigen::VectorXd theta_init;
  std::optional<factored_normal> selected;

  std::uint64_t n_logp() const noexcept { return lbfgs_logp_evals + elbo_logp_evals; }
  std::uint64_t n_grad() const noexcept { return lbfgs_grad_evals; }
};

/// Index l (1-based) of the largest finite ELBO; ties go to the earliest l.
inline std::size_t select_argmax(const std::vector<double>& elbo_trace) {
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < elbo_trace.size(); ++i) {
    const double v = elbo_trace[i];
    if (std::isfinite(v) && (best == 0 || v > best_value)) {
      best = i + 1;
      best_value = v;
    }
  }
  if (best == 0) throw all_failed("no candidate approximation has a finite ELBO");
  return best;
}

/// Marks `run` as failed with `last_point` as its only draw.
inline void mark_failed(pathfinder_run& run, const Eigen::VectorXd& last_point) {
  run.failed = true;
  run.l_star = 0;
  run.selected.reset();
  run.draws = last_point.transpose();
  run.logq = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());
}

namespace detail {

inline std::optional<factored_normal> try_build(const alpha_recovery& rec,
                                                const trajectory& path, std::size_t l,
                                                int history_size) {
  try {
    factored_normal approx =
        build_normal(assemble_factors(rec, l, history_size), path.thetas[l], path.grads[l]);
    if (!approx.mu.allFinite()) return std::nullopt;
    return approx;
  } catch (const singular_e&) {
    return std::nullopt;
  } catch (const cholesky_fail&) {
    return std::nullopt;
  }
}

}  // namespace detail

/**
 * Single-path Pathfinder.
 *
 * Random streams are derived from (seed, path_index, l, purpose), so results
 * do not depend on opts.workers.
 */
inline pathfinder_run run_single(const log_density_target& target,
                                 const pathfinder_options& opts, std::uint64_t seed,
                                 std::uint64_t path_index = 0) {
  opts.validate();
  const Eigen::Index n = target.dim();
  pathfinder_run run;

  rng_type init_rng = make_rng(seed, path_index, 0, stream_kind::init);
  std::uniform_real_distribution<double> init_dist(-opts.init_radius, opts.init_radius);
  run.theta_init.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) run.theta_init[i] = init_dist(init_rng);

  trajectory path;
  try {
    path = optimize(target, run.theta_init, opts.lbfgs);
  } catch (const non_finite_error&) {
    run.lbfgs_logp_evals = run.lbfgs_grad_evals = 1;
    run.reason = termination::line_search_failed;
    mark_failed(run, run.theta_init);
    return run;
  }
  run.lbfgs_logp_evals = path.n_logp_evals;
  run.lbfgs_grad_evals = path.n_grad_evals;
  run.iterations = path.iterations();
  run.reason = path.reason;

  if (run.iterations == 0) {
    mark_failed(run, path.thetas.back());
    return run;
  }

  const int history = opts.lbfgs.history_size;
  const alpha_recovery rec = alpha_recover(path, history);
  const std::size_t n_candidates = run.iterations;
  run.elbo_trace.assign(n_candidates, -std::numeric_limits<double>::infinity());
  std::vector<char> scored(n_candidates, 0);

  parallel_for(n_candidates, opts.workers, [&](std::size_t i) {
    const std::size_t l = i + 1;
    const auto approx = detail::try_build(rec, path, l, history);
    if (!approx) return;
    rng_type rng = make_rng(seed, path_index, l, stream_kind::elbo);
    run.elbo_trace[i] = monte_carlo_elbo(target, *approx, opts.elbo_draws, rng).value;
    scored[i] = 1;
  });

  for (char s : scored) run.scored_candidates += static_cast<std::size_t>(s);
  run.elbo_logp_evals =
      static_cast<std::uint64_t>(opts.elbo_draws) * static_cast<std::uint64_t>(run.scored_candidates);

  std::size_t l_star = 0;
  try {
    l_star = select_argmax(run.elbo_trace);
  } catch (const all_failed&) {
    mark_failed(run, path.thetas.back());
    return run;
  }

  // Rebuilding is deterministic, so the selected approximation need not be
  // kept from the scoring pass.
  auto approx = detail::try_build(rec, path, l_star, history);
  rng_type out_rng = make_rng(seed, path_index, l_star, stream_kind::output);
  draw_batch batch = sample(*approx, opts.num_draws, out_rng);
  run.l_star = l_star;
  run.draws = std::move(batch.draws);
  run.logq = std::move(batch.logq);
  run.selected = std::move(approx);
  return run;
}

}  // namespace pathfinder

#endif  // PATHFINDER_PATHFINDER_HPP
