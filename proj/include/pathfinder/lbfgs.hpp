#ifndef PATHFINDER_LBFGS_HPP
#define PATHFINDER_LBFGS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "compact_factors.hpp"
#include "errors.hpp"
#include "targets.hpp"

namespace pathfinder {

struct lbfgs_options {
  int history_size = 6;
  double rel_tol = 1e-13;
  int max_iterations = 1000;
  double c1 = 1e-4;
  double c2 = 0.9;
  /// A pair (s, z) is stored only when s'z > pair_eps * |z|^2.
  double pair_eps = 2.2e-16;
  /// Gradient norm below which the initial point counts as stationary.
  double grad_zero_tol = 1e-12;
  int max_halvings = 60;

  void validate() const {
    if (history_size < 1) throw bad_params("lbfgs: history_size must be >= 1");
    if (max_iterations < 1) throw bad_params("lbfgs: max_iterations must be >= 1");
    if (!(rel_tol > 0.0)) throw bad_params("lbfgs: rel_tol must be positive");
    if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
      throw bad_params("lbfgs: need 0 < c1 < c2 < 1");
    }
    if (!(pair_eps > 0.0)) throw bad_params("lbfgs: pair_eps must be positive");
    if (!(grad_zero_tol >= 0.0)) {
      throw bad_params("lbfgs: grad_zero_tol must be non-negative");
    }
    if (max_halvings < 0) throw bad_params("lbfgs: max_halvings must be >= 0");
  }
};

enum class termination {
  converged,
  max_iterations,
  line_search_failed,
  zero_gradient_at_init,
};

inline std::string_view to_string(termination t) {
  switch (t) {
    case termination::converged: return "converged";
    case termination::max_iterations: return "max_iterations";
    case termination::line_search_failed: return "line_search_failed";
    case termination::zero_gradient_at_init: return "zero_gradient_at_init";
  }
  return "unknown";
}

/// Optimization path theta^(0..L') with gradients and log densities. The
/// stored log densities are strictly increasing.
struct trajectory {
  std::vector<Eigen::VectorXd> thetas;
  std::vector<Eigen::VectorXd> grads;
  std::vector<double> logps;
  std::uint64_t n_logp_evals = 0;
  std::uint64_t n_grad_evals = 0;
  termination reason = termination::converged;

  /// L', the number of iterations taken.
  std::size_t iterations() const noexcept {
    return thetas.empty() ? 0 : thetas.size() - 1;
  }
};

/// L-BFGS search direction (diag(alpha) + beta gamma beta') grad from the
/// stored pairs, without forming an N x N matrix.
inline Eigen::VectorXd search_direction(const Eigen::MatrixXd& s,
                                        const Eigen::MatrixXd& z,
                                        const Eigen::VectorXd& alpha,
                                        const Eigen::VectorXd& grad) {
  if (grad.size() != alpha.size()) {
    throw dimension_mismatch("search_direction: gradient and alpha differ in length");
  }
  return make_compact_factors(s, z, alpha).apply(grad);
}

struct line_search_result {
  bool accepted = false;
  double step = 0.0;
  Eigen::VectorXd theta;
  double logp = 0.0;
  Eigen::VectorXd grad;
  int evaluations = 0;
  bool curvature_met = false;
};

/**
 * Backtracking over step sizes 1, 1/2, 1/4, ... until both
 *
 *   log p(theta + step delta) >= log p(theta) + c1 * step * grad' delta
 *   grad(theta + step delta)' delta <= c2 * grad' delta
 *
 * hold. A non-finite log density or gradient counts as a failed check.
 *
 * If no step passes both after `max_halvings` halvings, the largest step that
 * passed sufficient increase with a strict gain in log p is accepted instead
 * (curvature_met = false). Halving can only shorten a step, so the curvature
 * check alone can never succeed where log p is close to linear along delta.
 * With no such step the search fails.
 */
inline line_search_result wolfe_line_search(const log_density_target& target,
                                            const Eigen::VectorXd& theta,
                                            double logp,
                                            const Eigen::VectorXd& grad,
                                            const Eigen::VectorXd& delta,
                                            double c1, double c2,
                                            int max_halvings = 60) {
  line_search_result out;
  line_search_result fallback;
  const double slope = grad.dot(delta);
  double step = 1.0;
  for (int k = 0; k <= max_halvings; ++k, step *= 0.5) {
    Eigen::VectorXd candidate = theta + step * delta;
    ++out.evaluations;
    value_and_gradient vg;
    try {
      vg = target.log_density_gradient(candidate);
    } catch (const non_finite_error&) {
      continue;
    }
    const bool sufficient_increase = vg.logp >= logp + c1 * step * slope;
    const bool curvature = vg.grad.dot(delta) <= c2 * slope;
    if (sufficient_increase && curvature) {
      out.accepted = true;
      out.curvature_met = true;
      out.step = step;
      out.theta = std::move(candidate);
      out.logp = vg.logp;
      out.grad = std::move(vg.grad);
      return out;
    }
    if (sufficient_increase && !fallback.accepted && vg.logp > logp) {
      fallback.accepted = true;
      fallback.step = step;
      fallback.theta = std::move(candidate);
      fallback.logp = vg.logp;
      fallback.grad = std::move(vg.grad);
    }
  }
  if (fallback.accepted) {
    fallback.evaluations = out.evaluations;
    return fallback;
  }
  return out;
}

/**
 * Maximizes log p from `theta_init`, recording every accepted iterate.
 *
 * The inverse Hessian seed is diag(alpha) with alpha reset to
 * (s'z / z'z) 1_N whenever a pair (s, z) is stored. Throws non_finite_error when
 * the initial point has a non-finite log density or gradient.
 */
inline trajectory optimize(const log_density_target& target,
                           const Eigen::VectorXd& theta_init,
                           const lbfgs_options& opts = {}) {
  opts.validate();
  const Eigen::Index n = target.dim();
  if (theta_init.size() != n) {
    throw dimension_mismatch("optimize: initial point has the wrong length");
  }

  trajectory path;
  value_and_gradient vg = target.log_density_gradient(theta_init);
  path.n_logp_evals = path.n_grad_evals = 1;
  path.thetas.push_back(theta_init);
  path.grads.push_back(vg.grad);
  path.logps.push_back(vg.logp);

  if (vg.grad.norm() < opts.grad_zero_tol) {
    path.reason = termination::zero_gradient_at_init;
    return path;
  }

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> z_hist;
  Eigen::VectorXd alpha = Eigen::VectorXd::Ones(n);
  path.reason = termination::max_iterations;

  auto as_matrix = [n](const std::deque<Eigen::VectorXd>& cols) {
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      m.col(static_cast<Eigen::Index>(j)) = cols[j];
    }
    return m;
  };

  for (int l = 0; l < opts.max_iterations; ++l) {
    // Copies: the path vectors grow below.
    const Eigen::VectorXd theta = path.thetas.back();
    const Eigen::VectorXd grad = path.grads.back();
    const double logp = path.logps.back();

    if (grad.norm() < opts.grad_zero_tol) {
      path.reason = termination::converged;
      break;
    }

    const Eigen::VectorXd delta =
        search_direction(as_matrix(s_hist), as_matrix(z_hist), alpha, grad);
    const double slope = grad.dot(delta);
    if (!(slope > 0.0) || !std::isfinite(slope)) {
      path.reason = termination::line_search_failed;
      break;
    }

    line_search_result ls = wolfe_line_search(target, theta, logp, grad, delta,
                                              opts.c1, opts.c2, opts.max_halvings);
    path.n_logp_evals += static_cast<std::uint64_t>(ls.evaluations);
    path.n_grad_evals += static_cast<std::uint64_t>(ls.evaluations);
    if (!ls.accepted) {
      path.reason = termination::line_search_failed;
      break;
    }

    // Sufficient increase can be lost to roundoff once c1 * step * slope is
    // below the spacing of doubles near log p; such a step is not stored so
    // the recorded log densities stay strictly increasing.
    if (!(ls.logp > logp)) {
      path.reason = termination::converged;
      break;
    }

    const double rel_change = (ls.logp - logp) / std::max(std::abs(logp), 1e-10);
    Eigen::VectorXd s_new = ls.theta - theta;
    Eigen::VectorXd z_new = grad - ls.grad;
    path.thetas.push_back(std::move(ls.theta));
    path.grads.push_back(std::move(ls.grad));
    path.logps.push_back(ls.logp);

    if (rel_change < opts.rel_tol) {
      path.reason = termination::converged;
      break;
    }

    const double sz = s_new.dot(z_new);
    const double zz = z_new.squaredNorm();
    if (sz > opts.pair_eps * zz) {
      if (static_cast<int>(s_hist.size()) >= opts.history_size) {
        s_hist.pop_front();
        z_hist.pop_front();
      }
      s_hist.push_back(std::move(s_new));
      z_hist.push_back(std::move(z_new));
      // Inverse-Hessian seed s'z / z'z; its reciprocal is the matching
      // Hessian seed of the B-form update.
      alpha.setConstant(sz / zz);
    }
  }
  return path;
}

}  // namespace pathfinder

#endif  // PATHFINDER_LBFGS_HPP
