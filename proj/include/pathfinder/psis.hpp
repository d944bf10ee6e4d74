#ifndef PATHFINDER_PSIS_HPP
#define PATHFINDER_PSIS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "errors.hpp"

namespace pathfinder {

/// Smoothed log weights are unreliable above this Pareto shape.
inline constexpr double k_hat_warning_threshold = 0.7;

/// Sentinel k_hat for a tail that could not be fit.
inline constexpr double k_hat_degenerate = -std::numeric_limits<double>::infinity();

struct gpd_fit {
  double k = 0.0;
  double sigma = 0.0;
};

/**
 * Generalized Pareto fit to positive exceedances by the Zhang & Stephens
 * (2009) profile-likelihood quadrature, followed by the weakly informative
 * shrinkage of k toward 0.5 used in PSIS. `x` must be sorted ascending.
 */
inline gpd_fit fit_gpd(const std::vector<double>& x, int min_grid_pts = 30) {
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  const int prior = 3;
  const int m = min_grid_pts + static_cast<int>(std::floor(std::sqrt(nd)));
  const std::size_t quartile = static_cast<std::size_t>(std::floor(nd / 4.0 + 0.5));
  const double xstar = x[quartile == 0 ? 0 : quartile - 1];

  std::vector<double> theta(static_cast<std::size_t>(m));
  std::vector<double> log_lik(static_cast<std::size_t>(m));
  for (int j = 1; j <= m; ++j) {
    const double t = 1.0 / x.back() +
                     (1.0 - std::sqrt(m / (j - 0.5))) / prior / xstar;
    double mean_log = 0.0;
    for (double xi : x) mean_log += std::log1p(-t * xi);
    mean_log /= nd;
    theta[static_cast<std::size_t>(j - 1)] = t;
    log_lik[static_cast<std::size_t>(j - 1)] = nd * (std::log(-t / mean_log) - mean_log - 1.0);
  }

  double max_ll = -std::numeric_limits<double>::infinity();
  for (double v : log_lik) {
    if (!std::isnan(v)) max_ll = std::max(max_ll, v);
  }
  double norm = 0.0;
  for (double v : log_lik) norm += std::isnan(v) ? 0.0 : std::exp(v - max_ll);
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (!std::isnan(log_lik[j])) theta_hat += theta[j] * std::exp(log_lik[j] - max_ll) / norm;
  }

  gpd_fit fit;
  double k = 0.0;
  for (double xi : x) k += std::log1p(-theta_hat * xi);
  k /= nd;
  fit.sigma = -k / theta_hat;
  const double a = 10.0;
  fit.k = k * nd / (nd + a) + a * 0.5 / (nd + a);
  if (std::isnan(fit.k)) fit.k = std::numeric_limits<double>::infinity();
  return fit;
}

/// Quantile function of the generalized Pareto distribution (location 0).
inline double gpd_quantile(double p, double k, double sigma) {
  if (std::abs(k) < 1e-12) return -sigma * std::log1p(-p);
  return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

struct psis_result {
  Eigen::VectorXd log_w;
  double k_hat = k_hat_degenerate;
  std::size_t tail_length = 0;
};

/// min(ceil(0.2 S), ceil(3 sqrt(S)))
inline std::size_t psis_tail_length(std::size_t s) {
  const double sd = static_cast<double>(s);
  return static_cast<std::size_t>(
      std::min(std::ceil(0.2 * sd), std::ceil(3.0 * std::sqrt(sd))));
}

/**
 * Pareto-smoothed log importance weights.
 *
 * The largest M finite weights are replaced by expected order statistics of
 * a generalized Pareto fit to their exceedances over the next-largest weight,
 * then capped at the largest raw weight. Non-finite entries are excluded
 * from the fit and passed through unchanged.
 *
 * When the tail cannot be fit (all tail weights equal, or fewer than five of
 * them) the raw weights are returned with k_hat = k_hat_degenerate.
 */
inline psis_result psis_smooth(const Eigen::VectorXd& log_w) {
  std::vector<Eigen::Index> finite;
  for (Eigen::Index i = 0; i < log_w.size(); ++i) {
    if (std::isfinite(log_w[i])) finite.push_back(i);
  }
  if (finite.empty()) throw no_finite_weights("psis_smooth: no finite log weights");

  psis_result out;
  out.log_w = log_w;
  const std::size_t s = finite.size();
  const std::size_t tail_len = psis_tail_length(s);
  out.tail_length = tail_len;
  if (tail_len < 5 || tail_len >= s) return out;

  std::stable_sort(finite.begin(), finite.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return log_w[a] < log_w[b]; });
  const double max_lw = log_w[finite.back()];
  const double cutoff = log_w[finite[s - tail_len - 1]] - max_lw;
  const double tail_min = log_w[finite[s - tail_len]];
  if (max_lw - tail_min <= 0.0) return out;

  const double exp_cutoff = std::exp(cutoff);
  std::vector<double> exceed(tail_len);
  for (std::size_t j = 0; j < tail_len; ++j) {
    exceed[j] = std::exp(log_w[finite[s - tail_len + j]] - max_lw) - exp_cutoff;
  }
  const gpd_fit fit = fit_gpd(exceed);
  out.k_hat = fit.k;
  if (!std::isfinite(fit.k)) return out;

  for (std::size_t j = 0; j < tail_len; ++j) {
    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(tail_len);
    const double smoothed = std::log(gpd_quantile(p, fit.k, fit.sigma) + exp_cutoff);
    out.log_w[finite[s - tail_len + j]] = std::min(smoothed, 0.0) + max_lw;
  }
  return out;
}

/// Draws `count` indices with replacement, with probability proportional to
/// exp(log_w). Non-finite entries have probability zero.
template <typename Rng>
std::vector<std::size_t> resample(const Eigen::VectorXd& log_w, std::size_t count, Rng& rng) {
  double max_lw = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < log_w.size(); ++i) {
    if (std::isfinite(log_w[i])) max_lw = std::max(max_lw, log_w[i]);
  }
  if (!std::isfinite(max_lw)) throw no_finite_weights("resample: no finite log weights");

  std::vector<double> w(static_cast<std::size_t>(log_w.size()));
  for (Eigen::Index i = 0; i < log_w.size(); ++i) {
    w[static_cast<std::size_t>(i)] = std::isfinite(log_w[i]) ? std::exp(log_w[i] - max_lw) : 0.0;
  }
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::vector<std::size_t> out(count);
  for (auto& idx : out) idx = pick(rng);
  return out;
}

}  // namespace pathfinder

#endif  // PATHFINDER_PSIS_HPP
