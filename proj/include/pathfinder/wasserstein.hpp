#ifndef PATHFINDER_WASSERSTEIN_HPP
#define PATHFINDER_WASSERSTEIN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"

namespace pathfinder {

inline constexpr Eigen::Index wasserstein_max_points = 512;

namespace detail {

/**
 * Min-cost transportation between `supply.size()` sources and
 * `demand.size()` sinks on a complete bipartite graph, by successive
 * shortest paths with Dijkstra on reduced costs. Integer supplies and
 * demands with equal totals; returns the optimal total cost.
 */
inline double transport_cost(const Eigen::MatrixXd& cost, std::vector<std::int64_t> supply,
                             std::vector<std::int64_t> demand) {
  const auto na = static_cast<std::size_t>(cost.rows());
  const auto nb = static_cast<std::size_t>(cost.cols());
  const std::size_t nv = na + nb;
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<std::int64_t> flow(na * nb, 0);
  std::vector<double> potential(nv, 0.0);
  std::vector<double> dist(nv);
  std::vector<std::ptrdiff_t> parent(nv);
  std::vector<char> done(nv);
  std::int64_t remaining = std::accumulate(supply.begin(), supply.end(), std::int64_t{0});
  double total = 0.0;

  while (remaining > 0) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < na; ++i) {
      if (supply[i] > 0) dist[i] = 0.0;
    }
    // Dense Dijkstra: nodes [0, na) are sources, [na, nv) sinks. Forward arcs
    // source->sink are uncapacitated; sink->source arcs exist where flow > 0.
    for (std::size_t step = 0; step < nv; ++step) {
      std::size_t u = nv;
      double best = inf;
      for (std::size_t v = 0; v < nv; ++v) {
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      }
      if (u == nv) break;
      done[u] = 1;
      if (u < na) {
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t v = na + j;
          const double rc = std::max(0.0, cost(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) +
                                              potential[u] - potential[v]);
          if (dist[u] + rc < dist[v]) {
            dist[v] = dist[u] + rc;
            parent[v] = static_cast<std::ptrdiff_t>(u);
          }
        }
      } else {
        const std::size_t j = u - na;
        for (std::size_t i = 0; i < na; ++i) {
          if (flow[i * nb + j] <= 0) continue;
          const double rc = std::max(0.0, -cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                                              potential[u] - potential[i]);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            parent[i] = static_cast<std::ptrdiff_t>(u);
          }
        }
      }
    }

    std::size_t sink = nv;
    for (std::size_t j = 0; j < nb; ++j) {
      if (demand[j] > 0 && (sink == nv || dist[na + j] < dist[sink])) sink = na + j;
    }
    if (sink == nv || dist[sink] == inf) {
      throw error("transport: no augmenting path (unbalanced supplies)");
    }

    std::int64_t push = demand[sink - na];
    std::size_t v = sink;
    while (parent[v] >= 0) {
      const auto u = static_cast<std::size_t>(parent[v]);
      if (u >= na) push = std::min(push, flow[v * nb + (u - na)]);
      v = u;
    }
    push = std::min(push, supply[v]);

    v = sink;
    while (parent[v] >= 0) {
      const auto u = static_cast<std::size_t>(parent[v]);
      if (u < na) {
        flow[u * nb + (v - na)] += push;
        total += static_cast<double>(push) * cost(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v - na));
      } else {
        flow[v * nb + (u - na)] -= push;
        total -= static_cast<double>(push) * cost(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u - na));
      }
      v = u;
    }
    supply[v] -= push;
    demand[sink - na] -= push;
    remaining -= push;

    for (std::size_t w = 0; w < nv; ++w) {
      potential[w] += std::min(dist[w], dist[sink]);
    }
  }
  return total;
}

}  // namespace detail

/**
 * Exact 1-Wasserstein distance between two uniformly weighted point clouds
 * (rows are points) under the Euclidean ground metric. Sample sizes may
 * differ; each is capped at wasserstein_max_points.
 */
inline double wasserstein1(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw dimension_mismatch("wasserstein1: samples live in different dimensions");
  }
  if (a.rows() < 1 || b.rows() < 1) throw bad_params("wasserstein1: empty sample");
  if (a.rows() > wasserstein_max_points || b.rows() > wasserstein_max_points) {
    throw size_limit_exceeded("wasserstein1: at most " + std::to_string(wasserstein_max_points) +
                              " points per sample");
  }
  if (!a.allFinite() || !b.allFinite()) throw bad_params("wasserstein1: non-finite points");

  Eigen::MatrixXd cost(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) cost(i, j) = (a.row(i) - b.row(j)).norm();
  }
  const std::int64_t ma = a.rows();
  const std::int64_t mb = b.rows();
  const std::int64_t g = std::gcd(ma, mb);
  // Source i ships mb/g units, sink j receives ma/g units; one unit carries
  // mass g / (ma * mb).
  const double units = static_cast<double>(ma / g) * static_cast<double>(mb);
  const double total = detail::transport_cost(cost,
                                              std::vector<std::int64_t>(static_cast<std::size_t>(ma), mb / g),
                                              std::vector<std::int64_t>(static_cast<std::size_t>(mb), ma / g));
  return total / units;
}

}  // namespace pathfinder

#endif  // PATHFINDER_WASSERSTEIN_HPP
