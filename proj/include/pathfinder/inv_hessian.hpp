#ifndef PATHFINDER_INV_HESSIAN_HPP
#define PATHFINDER_INV_HESSIAN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "compact_factors.hpp"
#include "errors.hpp"
#include "lbfgs.hpp"

namespace pathfinder {

/// Curvature threshold used when selecting pairs for the covariance
/// estimates; stricter than the optimizer's own threshold.
inline constexpr double recovery_pair_eps = 1e-12;

/**
 * Per-iteration diagonal inverse Hessian seeds recovered along a trajectory.
 * Entry l - 1 of each list belongs to iteration l = 1..L.
 */
struct alpha_recovery {
  std::vector<Eigen::VectorXd> alphas;
  std::vector<bool> accepted;
  /// s^(l) = theta^(l) - theta^(l-1)
  std::vector<Eigen::VectorXd> s_list;
  /// z^(l) = grad log p(theta^(l-1)) - grad log p(theta^(l))
  std::vector<Eigen::VectorXd> z_list;

  std::size_t iterations() const noexcept { return alphas.size(); }
};

/**
 * Rebuilds a per-coordinate inverse Hessian diagonal along the path with the
 * Gilbert-Lemarechal diagonal update, starting from alpha^(0) = 1_N.
 *
 * A pair is used when s'z > 1e-12 |z|^2, i.e. when it satisfies the
 * curvature condition with margin. The reverse inequality would keep exactly
 * the pairs that break positive definiteness of the update.
 *
 * An update that produces a non-positive or non-finite component (possible
 * under roundoff) rejects the pair instead.
 */
inline alpha_recovery alpha_recover(const trajectory& path, int history_size) {
  if (history_size < 1) throw bad_params("alpha_recover: history size must be >= 1");
  const std::size_t n_iter = path.iterations();
  if (n_iter < 1) throw bad_params("alpha_recover: trajectory has no iterations");

  alpha_recovery out;
  out.alphas.reserve(n_iter);
  out.accepted.reserve(n_iter);
  out.s_list.reserve(n_iter);
  out.z_list.reserve(n_iter);

  Eigen::VectorXd alpha = Eigen::VectorXd::Ones(path.thetas.front().size());
  for (std::size_t l = 1; l <= n_iter; ++l) {
    Eigen::VectorXd s = path.thetas[l] - path.thetas[l - 1];
    Eigen::VectorXd z = path.grads[l - 1] - path.grads[l];

    bool use = false;
    const double b = z.dot(s);
    if (b > recovery_pair_eps * z.squaredNorm()) {
      const double a = z.dot(alpha.cwiseProduct(z));
      const double c = s.dot(s.cwiseQuotient(alpha));
      const Eigen::ArrayXd inv = a / (b * alpha.array()) + z.array().square() / b -
                                 a * s.array().square() / (b * c * alpha.array().square());
      const Eigen::ArrayXd updated = inv.inverse();
      if ((updated > 0.0).all() && updated.allFinite()) {
        alpha = updated.matrix();
        use = true;
      }
    }
    out.alphas.push_back(alpha);
    out.accepted.push_back(use);
    out.s_list.push_back(std::move(s));
    out.z_list.push_back(std::move(z));
  }
  return out;
}

/**
 * Compact factors of the covariance estimate at iteration l (1-based): the
 * last (at most) `history_size` accepted pairs up to l, newest last, on top
 * of diag(alpha^(l)). Older pairs are dropped further until 2 J' <= N so the
 * thin QR used for sampling exists.
 */
inline compact_factors assemble_factors(const alpha_recovery& rec, std::size_t l,
                                        int history_size) {
  if (l < 1 || l > rec.iterations()) {
    throw bad_params("assemble_factors: iteration index out of range");
  }
  if (history_size < 1) throw bad_params("assemble_factors: history size must be >= 1");
  const Eigen::Index n = rec.alphas.front().size();

  std::vector<std::size_t> chosen;
  const std::size_t cap = std::min<std::size_t>(static_cast<std::size_t>(history_size),
                                                static_cast<std::size_t>(n / 2));
  for (std::size_t i = l; i-- > 0 && chosen.size() < cap;) {
    if (rec.accepted[i]) chosen.push_back(i);
  }
  std::reverse(chosen.begin(), chosen.end());

  const auto j = static_cast<Eigen::Index>(chosen.size());
  Eigen::MatrixXd s(n, j);
  Eigen::MatrixXd z(n, j);
  for (Eigen::Index c = 0; c < j; ++c) {
    s.col(c) = rec.s_list[chosen[static_cast<std::size_t>(c)]];
    z.col(c) = rec.z_list[chosen[static_cast<std::size_t>(c)]];
  }
  return make_compact_factors(std::move(s), std::move(z), rec.alphas[l - 1]);
}

}  // namespace pathfinder

#endif  // PATHFINDER_INV_HESSIAN_HPP
