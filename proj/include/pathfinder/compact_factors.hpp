#ifndef PATHFINDER_COMPACT_FACTORS_HPP
#define PATHFINDER_COMPACT_FACTORS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "errors.hpp"

namespace pathfinder {

/**
 * Compact limited-memory representation of an inverse Hessian,
 *
 *   Sigma = diag(alpha) + beta * gamma * beta'
 *
 * with beta = [diag(alpha) Z, S] and
 *
 *   gamma = [ 0        -E^-1                                ]
 *           [ -E^-T    E^-T (diag(eta) + Z' diag(alpha) Z) E^-1 ]
 *
 * where E is the upper triangle of S'Z and eta its diagonal. Columns of S and
 * Z are position and (negative log density) gradient updates, oldest first.
 * Sigma itself is never formed.
 */
struct compact_factors {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd s;
  Eigen::MatrixXd z;
  Eigen::MatrixXd e;
  Eigen::VectorXd eta;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd gamma;

  Eigen::Index dim() const noexcept { return alpha.size(); }
  Eigen::Index pairs() const noexcept { return s.cols(); }
  bool empty() const noexcept { return s.cols() == 0; }

  /// (diag(alpha) + beta gamma beta') v in O(N J + J^2).
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = alpha.cwiseProduct(v);
    if (!empty()) out.noalias() += beta * (gamma * (beta.transpose() * v));
    return out;
  }
};

/// Builds the compact factors from stored pairs. Throws singular_e when a
/// diagonal entry of E is not strictly positive.
inline compact_factors make_compact_factors(Eigen::MatrixXd s, Eigen::MatrixXd z,
                                            Eigen::VectorXd alpha) {
  if (s.rows() != alpha.size() || z.rows() != alpha.size() ||
      s.cols() != z.cols()) {
    throw dimension_mismatch("compact factors: S, Z and alpha disagree in shape");
  }
  compact_factors f;
  const Eigen::Index n = alpha.size();
  const Eigen::Index j = s.cols();
  f.alpha = std::move(alpha);
  f.s = std::move(s);
  f.z = std::move(z);

  if (j == 0) {
    f.e.resize(0, 0);
    f.eta.resize(0);
    f.beta.resize(n, 0);
    f.gamma.resize(0, 0);
    return f;
  }

  f.e = (f.s.transpose() * f.z).triangularView<Eigen::Upper>();
  f.eta = f.e.diagonal();
  for (Eigen::Index i = 0; i < j; ++i) {
    if (!(f.eta[i] > 0.0) || !std::isfinite(f.eta[i])) {
      throw singular_e("E has a non-positive diagonal entry at column " +
                       std::to_string(i));
    }
  }

  const Eigen::MatrixXd e_inv = f.e.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(j, j));
  const Eigen::MatrixXd az = f.alpha.asDiagonal() * f.z;

  f.beta.resize(n, 2 * j);
  f.beta << az, f.s;

  Eigen::MatrixXd middle = f.z.transpose() * az;
  middle.diagonal() += f.eta;

  f.gamma.setZero(2 * j, 2 * j);
  f.gamma.topRightCorner(j, j) = -e_inv;
  f.gamma.bottomLeftCorner(j, j) = -e_inv.transpose();
  f.gamma.bottomRightCorner(j, j) = e_inv.transpose() * middle * e_inv;
  return f;
}

}  // namespace pathfinder

#endif  // PATHFINDER_COMPACT_FACTORS_HPP
