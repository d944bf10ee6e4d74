#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pathfinder/wasserstein.hpp"

using namespace pathfinder;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_points(Eigen::Index m, Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatrixXd p(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) p(i, j) = nd(rng);
  return p;
}

}  // namespace

TEST(Wasserstein, IdenticalSamples) {
  std::mt19937_64 rng(1);
  const MatrixXd a = random_points(20, 3, rng);
  EXPECT_NEAR(wasserstein1(a, a), 0.0, 1e-12);
}

TEST(Wasserstein, PointMasses) {
  const MatrixXd x{{1.0, 2.0}};
  const MatrixXd y{{4.0, 6.0}};
  EXPECT_NEAR(wasserstein1(x, y), 5.0, 1e-12);
}

TEST(Wasserstein, MatchesPermutationOracle) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const MatrixXd a = random_points(3, 2, rng);
    const MatrixXd b = random_points(3, 2, rng);
    EXPECT_NEAR(wasserstein1(a, b), oracle::w1_permutations(a, b), 1e-9);
  }
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd a = random_points(6, 3, rng);
    const MatrixXd b = random_points(6, 3, rng);
    EXPECT_NEAR(wasserstein1(a, b), oracle::w1_permutations(a, b), 1e-9);
  }
}

TEST(Wasserstein, UnequalSizesMatchReplicatedAssignment) {
  // Uniform masses 1/2 vs 1/4: replicating each point of the smaller sample
  // twice gives an equal-size problem with the same optimum.
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd a = random_points(2, 2, rng);
    const MatrixXd b = random_points(4, 2, rng);
    MatrixXd a2(4, 2);
    a2 << a.row(0), a.row(0), a.row(1), a.row(1);
    EXPECT_NEAR(wasserstein1(a, b), oracle::w1_permutations(a2, b), 1e-9);
  }
}

TEST(Wasserstein, MetricAxioms) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const MatrixXd a = random_points(5, 2, rng);
    const MatrixXd b = random_points(7, 2, rng);
    const MatrixXd c = random_points(4, 2, rng);
    EXPECT_NEAR(wasserstein1(a, b), wasserstein1(b, a), 1e-10);
    EXPECT_LE(wasserstein1(a, c), wasserstein1(a, b) + wasserstein1(b, c) + 1e-9);
  }
}

TEST(Wasserstein, Translation) {
  std::mt19937_64 rng(5);
  const MatrixXd a = random_points(30, 3, rng);
  const MatrixXd b = random_points(25, 3, rng);
  const Eigen::RowVectorXd v{{0.5, -1.0, 2.0}};
  EXPECT_NEAR(wasserstein1(a.rowwise() + v, b.rowwise() + v), wasserstein1(a, b), 1e-9);
  EXPECT_NEAR(wasserstein1(a.rowwise() + v, a), v.norm(), 1e-9);
}

TEST(Wasserstein, Errors) {
  EXPECT_THROW(wasserstein1(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 3)), dimension_mismatch);
  EXPECT_THROW(wasserstein1(MatrixXd::Zero(513, 1), MatrixXd::Zero(2, 1)), size_limit_exceeded);
  EXPECT_THROW(wasserstein1(MatrixXd::Zero(0, 1), MatrixXd::Zero(2, 1)), bad_params);
  EXPECT_NO_THROW(wasserstein1(MatrixXd::Zero(512, 1), MatrixXd::Zero(3, 1)));
}
