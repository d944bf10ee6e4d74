#ifndef PATHFINDER_ELBO_HPP
#define PATHFINDER_ELBO_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "errors.hpp"
#include "normal_approx.hpp"
#include "targets.hpp"

namespace pathfinder {

struct elbo_estimate {
  /// Mean of per_draw, or -inf when any term is non-finite.
  double value = -std::numeric_limits<double>::infinity();
  Eigen::Index draws = 0;
  /// log p(phi_k) - log q(phi_k)
  Eigen::VectorXd per_draw;
};

/// Monte Carlo ELBO from matched log p / log q values. A non-finite log p or
/// log q disqualifies the candidate (value -inf) rather than raising.
inline elbo_estimate estimate_elbo(const Eigen::VectorXd& logp, const Eigen::VectorXd& logq) {
  if (logp.size() != logq.size()) {
    throw dimension_mismatch("estimate_elbo: log p and log q differ in length");
  }
  if (logp.size() < 1) throw dimension_mismatch("estimate_elbo: need at least one draw");
  elbo_estimate out;
  out.draws = logp.size();
  out.per_draw = logp - logq;
  if (!logp.allFinite() || !logq.allFinite()) {
    out.value = -std::numeric_limits<double>::infinity();
  } else {
    out.value = out.per_draw.mean();
  }
  return out;
}

/// Draws `count` points from `approx`, evaluates the target at each (one
/// log-density evaluation per draw, no gradients) and averages.
template <typename Rng>
elbo_estimate monte_carlo_elbo(const log_density_target& target, const factored_normal& approx,
                               Eigen::Index count, Rng& rng) {
  const draw_batch batch = sample(approx, count, rng);
  Eigen::VectorXd logp(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    logp[k] = target.log_density(batch.draws.row(k).transpose());
  }
  return estimate_elbo(logp, batch.logq);
}

}  // namespace pathfinder

#endif  // PATHFINDER_ELBO_HPP
