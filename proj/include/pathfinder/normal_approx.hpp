#ifndef PATHFINDER_NORMAL_APPROX_HPP
#define PATHFINDER_NORMAL_APPROX_HPP

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "compact_factors.hpp"
#include "errors.hpp"
#include "targets.hpp"

namespace pathfinder {

/**
 * Normal approximation N(mu, Sigma) with Sigma = diag(alpha) + beta gamma beta'
 * held as Sigma = T T', T = diag(sqrt(alpha)) [Q L, P], where
 *
 *   Q R = diag(alpha)^(-1/2) beta          (thin QR, Q is N x 2J')
 *   L L' = I + R gamma R'                  (Cholesky, 2J' x 2J')
 *
 * and P completes Q to an orthogonal basis. P is never formed: P P' u is
 * computed as u - Q Q' u. Storage and per-draw cost are O(N J' + J'^2).
 */
struct factored_normal {
  Eigen::VectorXd mu;
  Eigen::VectorXd alpha;
  Eigen::VectorXd sqrt_alpha;
  Eigen::MatrixXd q;
  Eigen::MatrixXd l_tilde;
  double logdet = 0.0;

  Eigen::Index dim() const noexcept { return mu.size(); }
  /// 2J', zero for a purely diagonal covariance.
  Eigen::Index rank() const noexcept { return q.cols(); }

  /// mu + diag(sqrt(alpha)) (Q (L - I) Q' u + u) for a standard normal u.
  Eigen::VectorXd transform(const Eigen::VectorXd& u) const {
    Eigen::VectorXd v = u;
    if (rank() > 0) {
      const Eigen::VectorXd qu = q.transpose() * u;
      v.noalias() += q * (l_tilde.triangularView<Eigen::Lower>() * qu - qu);
    }
    return mu + sqrt_alpha.cwiseProduct(v);
  }
};

struct draw_batch {
  /// One draw per row.
  Eigen::MatrixXd draws;
  Eigen::VectorXd logq;
  Eigen::VectorXd u_norms_sq;
};

namespace detail {

inline constexpr double reorthogonalize_tol = 1e-8;

/// Thin Householder QR of an N x k matrix (k <= N); returns Q (N x k) and
/// upper-triangular R (k x k).
inline void thin_qr(const Eigen::MatrixXd& a, Eigen::MatrixXd& q, Eigen::MatrixXd& r) {
  const Eigen::Index n = a.rows();
  const Eigen::Index k = a.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

}  // namespace detail

/**
 * Builds the approximation at a trajectory point theta with gradient `grad`:
 * mean theta + Sigma grad, covariance from `factors`.
 *
 * Throws cholesky_fail when I + R gamma R' is not positive definite.
 */
inline factored_normal build_normal(const compact_factors& factors,
                                    const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& grad) {
  const Eigen::Index n = factors.dim();
  if (theta.size() != n || grad.size() != n) {
    throw dimension_mismatch("build_normal: theta/grad length differs from alpha");
  }
  if (2 * factors.pairs() > n) {
    throw dimension_mismatch("build_normal: need 2J' <= N for the thin QR");
  }

  factored_normal out;
  out.alpha = factors.alpha;
  out.sqrt_alpha = factors.alpha.cwiseSqrt();
  out.mu = theta + factors.apply(grad);
  out.logdet = factors.alpha.array().log().sum();

  const Eigen::Index k = 2 * factors.pairs();
  if (k == 0) {
    out.q.resize(n, 0);
    out.l_tilde.resize(0, 0);
    return out;
  }

  const Eigen::MatrixXd scaled = out.sqrt_alpha.cwiseInverse().asDiagonal() * factors.beta;
  Eigen::MatrixXd r;
  detail::thin_qr(scaled, out.q, r);
  const double ortho_err =
      (out.q.transpose() * out.q - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
  if (ortho_err > detail::reorthogonalize_tol) {
    Eigen::MatrixXd q2;
    Eigen::MatrixXd r2;
    detail::thin_qr(out.q, q2, r2);
    out.q = std::move(q2);
    r = r2 * r;
  }

  Eigen::MatrixXd inner = r * factors.gamma * r.transpose();
  inner = 0.5 * (inner + inner.transpose());
  inner.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success) {
    throw cholesky_fail("I + R gamma R' is not positive definite");
  }
  out.l_tilde = llt.matrixL();
  const Eigen::VectorXd diag = out.l_tilde.diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) {
    throw cholesky_fail("Cholesky factor has a non-positive diagonal");
  }
  out.logdet += 2.0 * diag.array().log().sum();
  if (!std::isfinite(out.logdet)) throw cholesky_fail("non-finite log determinant");
  return out;
}

/// log N(mu, Sigma) at mu + T u, which only needs |u|^2.
inline double logq_from_norm_sq(const factored_normal& approx, double u_norm_sq) {
  return -0.5 * (approx.logdet + u_norm_sq + static_cast<double>(approx.dim()) * log_two_pi);
}

template <typename Rng>
draw_batch sample(const factored_normal& approx, Eigen::Index count, Rng& rng) {
  const Eigen::Index n = approx.dim();
  std::normal_distribution<double> std_normal(0.0, 1.0);
  draw_batch out;
  out.draws.resize(count, n);
  out.logq.resize(count);
  out.u_norms_sq.resize(count);
  Eigen::VectorXd u(n);
  for (Eigen::Index m = 0; m < count; ++m) {
    for (Eigen::Index i = 0; i < n; ++i) u[i] = std_normal(rng);
    out.draws.row(m) = approx.transform(u).transpose();
    out.u_norms_sq[m] = u.squaredNorm();
    out.logq[m] = logq_from_norm_sq(approx, out.u_norms_sq[m]);
  }
  return out;
}

/**
 * Exact log density of x under the approximation. With w = (x - mu) /
 * sqrt(alpha), the whitened point is [L^-1 Q' w; P' w] and
 * |P' w|^2 = |w|^2 - |Q' w|^2.
 */
inline double eval_logq(const factored_normal& approx, const Eigen::VectorXd& x) {
  if (x.size() != approx.dim()) throw dimension_mismatch("eval_logq: wrong length");
  const Eigen::VectorXd w = (x - approx.mu).cwiseQuotient(approx.sqrt_alpha);
  double norm_sq = w.squaredNorm();
  if (approx.rank() > 0) {
    const Eigen::VectorXd qw = approx.q.transpose() * w;
    const Eigen::VectorXd head = approx.l_tilde.triangularView<Eigen::Lower>().solve(qw);
    norm_sq += head.squaredNorm() - qw.squaredNorm();
  }
  return logq_from_norm_sq(approx, norm_sq);
}

}  // namespace pathfinder

#endif  // PATHFINDER_NORMAL_APPROX_HPP
