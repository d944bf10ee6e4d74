#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pathfinder/normal_approx.hpp"
#include "pathfinder/random.hpp"

using namespace pathfinder;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct instance {
  compact_factors factors;
  VectorXd theta;
  VectorXd grad;
  MatrixXd sigma;  // dense oracle covariance
};

instance random_instance(Eigen::Index n, Eigen::Index pairs, std::mt19937_64& rng) {
  instance in;
  MatrixXd s, z;
  oracle::random_pairs(n, pairs, rng, s, z);
  const VectorXd alpha = oracle::random_alpha(n, rng);
  in.sigma = oracle::bfgs_inverse_hessian(alpha, s, z);
  in.factors = make_compact_factors(s, z, alpha);
  in.theta = oracle::random_vector(n, rng);
  in.grad = oracle::random_vector(n, rng);
  return in;
}

/// T = diag(sqrt(alpha)) [Q L, P] with P an explicit orthonormal complement.
MatrixXd dense_t(const factored_normal& a) {
  const Eigen::Index n = a.dim();
  const Eigen::Index k = a.rank();
  MatrixXd basis(n, n);
  if (k > 0) {
    Eigen::HouseholderQR<MatrixXd> full(a.q);
    basis = full.householderQ() * MatrixXd::Identity(n, n);
  } else {
    basis.setIdentity();
  }
  MatrixXd t(n, n);
  if (k > 0) t.leftCols(k) = a.q * a.l_tilde;
  t.rightCols(n - k) = basis.rightCols(n - k);
  return a.sqrt_alpha.asDiagonal() * t;
}

}  // namespace

TEST(BuildNormal, EmptyFactorsIsStandardNormal) {
  const auto f = make_compact_factors(MatrixXd(3, 0), MatrixXd(3, 0), VectorXd::Ones(3));
  const auto a = build_normal(f, VectorXd::Zero(3), VectorXd::Zero(3));
  EXPECT_EQ(a.mu, VectorXd::Zero(3));
  EXPECT_EQ(a.logdet, 0.0);
  EXPECT_EQ(a.rank(), 0);
}

TEST(BuildNormal, NewtonStepOnStandardNormalLandsOnMode) {
  const VectorXd t{{0.4, -1.3, 2.0}};
  const auto f = make_compact_factors(MatrixXd(3, 0), MatrixXd(3, 0), VectorXd::Ones(3));
  const auto a = build_normal(f, t, -t);
  EXPECT_LT(a.mu.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BuildNormal, MeanAndLogdetMatchDenseOracle) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 2 + rep % 7;
    const auto in = random_instance(n, std::min<Eigen::Index>(3, n / 2), rng);
    const auto a = build_normal(in.factors, in.theta, in.grad);
    EXPECT_LE((a.mu - (in.theta + in.sigma * in.grad)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(a.logdet, oracle::log_det(in.sigma), 1e-8);
  }
}

TEST(BuildNormal, FactorInvariants) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 2 + rep % 7;
    const auto in = random_instance(n, std::min<Eigen::Index>(3, n / 2), rng);
    const auto a = build_normal(in.factors, in.theta, in.grad);
    const MatrixXd qtq = a.q.transpose() * a.q;
    EXPECT_LE((qtq - MatrixXd::Identity(a.rank(), a.rank())).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE((a.l_tilde.diagonal().array() > 0).all());
    EXPECT_TRUE(std::isfinite(a.logdet));
    const MatrixXd t = dense_t(a);
    EXPECT_LE((t * t.transpose() - in.sigma).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(BuildNormal, CholeskyFailureIsReported) {
  std::mt19937_64 rng(7);
  auto in = random_instance(4, 1, rng);
  in.factors.gamma *= -50.0;
  EXPECT_THROW(build_normal(in.factors, in.theta, in.grad), cholesky_fail);
}

TEST(BuildNormal, RankAboveHalfDimensionRejected) {
  std::mt19937_64 rng(8);
  MatrixXd s, z;
  oracle::random_pairs(3, 2, rng, s, z);
  const auto f = make_compact_factors(s, z, VectorXd::Ones(3));
  EXPECT_THROW(build_normal(f, VectorXd::Zero(3), VectorXd::Zero(3)), dimension_mismatch);
}

TEST(Sample, IdentityTransformReturnsTheNormals) {
  const auto f = make_compact_factors(MatrixXd(4, 0), MatrixXd(4, 0), VectorXd::Ones(4));
  const auto a = build_normal(f, VectorXd::Zero(4), VectorXd::Zero(4));
  rng_type rng(42);
  const auto batch = sample(a, 10, rng);
  rng_type replay(42);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int m = 0; m < 10; ++m) {
    VectorXd u(4);
    for (auto& v : u) v = nd(replay);
    EXPECT_EQ(batch.draws.row(m).transpose(), u);
    EXPECT_NEAR(batch.logq[m], -0.5 * (u.squaredNorm() + 4 * oracle::log_two_pi), 1e-14);
  }
}

TEST(Sample, SameSeedIsBitIdentical) {
  std::mt19937_64 gen(9);
  const auto in = random_instance(6, 2, gen);
  const auto a = build_normal(in.factors, in.theta, in.grad);
  rng_type r1 = make_rng(5, 1, 2, stream_kind::output);
  rng_type r2 = make_rng(5, 1, 2, stream_kind::output);
  const auto b1 = sample(a, 50, r1);
  const auto b2 = sample(a, 50, r2);
  EXPECT_EQ(b1.draws, b2.draws);
  EXPECT_EQ(b1.logq, b2.logq);
}

TEST(Sample, CovarianceMatchesDenseOracle) {
  std::mt19937_64 gen(10);
  const auto in = random_instance(3, 1, gen);
  const auto a = build_normal(in.factors, in.theta, in.grad);
  rng_type rng(11);
  const int m = 100000;
  const auto batch = sample(a, m, rng);
  const VectorXd mean = batch.draws.colwise().mean().transpose();
  const MatrixXd cov = oracle::sample_cov(batch.draws);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LE(std::abs(mean[i] - a.mu[i]), 3.0 * std::sqrt(in.sigma(i, i) / m));
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt((in.sigma(i, i) * in.sigma(j, j) + in.sigma(i, j) * in.sigma(i, j)) / m);
      EXPECT_LE(std::abs(cov(i, j) - in.sigma(i, j)), 3.0 * se) << i << "," << j;
    }
  }
}

TEST(Sample, LogqRoundTripsThroughEvalLogq) {
  std::mt19937_64 gen(12);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index n = 2 + rep % 7;
    const auto in = random_instance(n, std::min<Eigen::Index>(3, n / 2), gen);
    const auto a = build_normal(in.factors, in.theta, in.grad);
    rng_type rng(static_cast<std::uint64_t>(rep));
    const auto batch = sample(a, 50, rng);
    for (int m = 0; m < 50; ++m) {
      const VectorXd x = batch.draws.row(m).transpose();
      EXPECT_NEAR(eval_logq(a, x), batch.logq[m], 1e-8);
      EXPECT_NEAR(oracle::mvn_logpdf(x, a.mu, in.sigma), batch.logq[m], 1e-8);
      EXPECT_NEAR(batch.logq[m], logq_from_norm_sq(a, batch.u_norms_sq[m]), 0.0);
    }
  }
}

TEST(EvalLogq, ClosedFormCases) {
  std::mt19937_64 gen(13);
  const auto in = random_instance(5, 2, gen);
  const auto a = build_normal(in.factors, in.theta, in.grad);
  EXPECT_NEAR(eval_logq(a, a.mu), -0.5 * (a.logdet + 5 * oracle::log_two_pi), 1e-12);

  const auto f = make_compact_factors(MatrixXd(4, 0), MatrixXd(4, 0), VectorXd::Ones(4));
  const auto id = build_normal(f, VectorXd::Zero(4), VectorXd::Zero(4));
  EXPECT_NEAR(eval_logq(id, VectorXd::Unit(4, 0)), -0.5 * (1.0 + 4 * oracle::log_two_pi), 1e-14);
}

TEST(EvalLogq, MatchesDenseDensity) {
  std::mt19937_64 gen(14);
  for (int rep = 0; rep < 50; ++rep) {
    const auto in = random_instance(5, 2, gen);
    const auto a = build_normal(in.factors, in.theta, in.grad);
    const VectorXd x = oracle::random_vector(5, gen, 2.0);
    EXPECT_NEAR(eval_logq(a, x), oracle::mvn_logpdf(x, a.mu, in.sigma), 1e-8);
  }
}
