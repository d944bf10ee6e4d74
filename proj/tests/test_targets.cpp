#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "pathfinder/targets.hpp"

using namespace pathfinder;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double norm_lpdf(double y, double mu, double sd) {
  const double d = (y - mu) / sd;
  return -0.5 * d * d - std::log(sd) - 0.5 * oracle::log_two_pi;
}

void expect_fd_gradient(const log_density_target& t, std::mt19937_64& rng, double scale, int points = 100) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (int p = 0; p < points; ++p) {
    VectorXd theta(t.dim());
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = u(rng);
    const VectorXd g = t.log_density_gradient(theta).grad;
    const VectorXd fd = oracle::fd_gradient(t, theta);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      EXPECT_LE(std::abs(g[i] - fd[i]), 1e-4 * std::max(1.0, std::abs(fd[i])))
          << t.name() << " coordinate " << i;
    }
  }
}

}  // namespace

TEST(Targets, StdNormalAtOrigin) {
  std_normal_target t(2);
  const auto vg = t.log_density_gradient(VectorXd::Zero(2));
  EXPECT_NEAR(vg.logp, -std::log(2.0 * std::numbers::pi), 1e-14);
  EXPECT_EQ(vg.grad, VectorXd::Zero(2));
}

TEST(Targets, StdNormalOneDim) {
  std_normal_target t(1);
  const auto vg = t.log_density_gradient(VectorXd::Constant(1, 3.0));
  EXPECT_NEAR(vg.logp, -4.5 - 0.5 * std::log(2.0 * std::numbers::pi), 1e-14);
  EXPECT_DOUBLE_EQ(vg.grad[0], -3.0);
}

TEST(Targets, FunnelAtOriginMatchesHandOracle) {
  neal_funnel_target t(2);
  const double expected = norm_lpdf(0.0, 0.0, 3.0) + norm_lpdf(0.0, 0.0, 1.0);
  EXPECT_NEAR(t.log_density_gradient(VectorXd::Zero(2)).logp, expected, 1e-14);
}

TEST(Targets, FunnelHundredDims) {
  auto t = make_target("neal_funnel", {{"dim", 100}});
  EXPECT_EQ(t->dim(), 100);
  std::mt19937_64 rng(3);
  const VectorXd x = oracle::random_vector(100, rng);
  double expected = norm_lpdf(x[0], 0.0, 3.0);
  for (int i = 1; i < 100; ++i) expected += norm_lpdf(x[i], 0.0, std::exp(x[0] / 2.0));
  EXPECT_NEAR(t->log_density(x), expected, 1e-9 * std::abs(expected));
}

TEST(Targets, MvnIdentityEqualsStdNormal) {
  auto mvn = make_target("mvn", {{"mu", {0.0, 0.0}}, {"cov", {{1.0, 0.0}, {0.0, 1.0}}}});
  std_normal_target ref(2);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const VectorXd x = oracle::random_vector(2, rng, 2.0);
    const auto a = mvn->log_density_gradient(x);
    const auto b = ref.log_density_gradient(x);
    EXPECT_NEAR(a.logp, b.logp, 1e-12);
    EXPECT_LT((a.grad - b.grad).norm(), 1e-12);
  }
}

TEST(Targets, MvnMatchesDenseFormula) {
  std::mt19937_64 rng(11);
  const MatrixXd b = MatrixXd::Random(4, 4);
  const MatrixXd cov = b * b.transpose() + 0.5 * MatrixXd::Identity(4, 4);
  const VectorXd mu = oracle::random_vector(4, rng);
  mvn_target t(mu, cov);
  for (int i = 0; i < 50; ++i) {
    const VectorXd x = oracle::random_vector(4, rng, 2.0);
    EXPECT_NEAR(t.log_density(x), oracle::mvn_logpdf(x, mu, cov), 1e-10);
  }
}

TEST(Targets, MvnRejectsBadCovariance) {
  const VectorXd mu = VectorXd::Zero(2);
  MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  EXPECT_THROW(mvn_target(mu, asym), bad_params);
  MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(mvn_target(mu, indefinite), bad_params);
  EXPECT_THROW(mvn_target(mu, MatrixXd::Identity(3, 3)), bad_params);
}

TEST(Targets, EightSchoolsCenteredMatchesScriptedDensity) {
  eight_schools_target t(true);
  std::mt19937_64 rng(2);
  const VectorXd x = oracle::random_vector(10, rng);
  const double tau = std::exp(x[1]);
  double expected = norm_lpdf(x[0], 0.0, 5.0);
  expected += std::log(2.0 / (std::numbers::pi * 5.0 * (1.0 + (tau / 5.0) * (tau / 5.0)))) + x[1];
  for (int j = 0; j < 8; ++j) {
    expected += norm_lpdf(x[2 + j], x[0], tau) +
                norm_lpdf(eight_schools_target::y[j], x[2 + j], eight_schools_target::sigma[j]);
  }
  EXPECT_NEAR(t.log_density(x), expected, 1e-10);
}

TEST(Targets, EightSchoolsNonCenteredIsReparameterization) {
  eight_schools_target nc(false);
  std::mt19937_64 rng(4);
  const VectorXd x = oracle::random_vector(10, rng);
  const double tau = std::exp(x[1]);
  double expected = norm_lpdf(x[0], 0.0, 5.0);
  expected += std::log(2.0 / (std::numbers::pi * 5.0 * (1.0 + (tau / 5.0) * (tau / 5.0)))) + x[1];
  for (int j = 0; j < 8; ++j) {
    expected += norm_lpdf(x[2 + j], 0.0, 1.0) +
                norm_lpdf(eight_schools_target::y[j], x[0] + tau * x[2 + j], eight_schools_target::sigma[j]);
  }
  EXPECT_NEAR(nc.log_density(x), expected, 1e-10);
}

TEST(Targets, LogisticRegressionGradientTight) {
  auto t = make_target("logistic_regression", {{"dim", 3}, {"n", 20}});
  EXPECT_EQ(t->dim(), 3);
  std::mt19937_64 rng(8);
  for (int p = 0; p < 50; ++p) {
    const VectorXd beta = oracle::random_vector(3, rng);
    const VectorXd g = t->log_density_gradient(beta).grad;
    const VectorXd fd = oracle::fd_gradient(*t, beta);
    for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(g[i] - fd[i]), 1e-5 * std::max(1.0, std::abs(fd[i])));
  }
}

TEST(Targets, LogisticRegressionExplicitData) {
  nlohmann::json p = {{"X", {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}}, {"y", {1, 0, 1}}};
  auto t = make_target("logistic_regression", p);
  const VectorXd beta = VectorXd::Zero(2);
  // Each observation contributes log(1/2); each coefficient a standard normal at 0.
  EXPECT_NEAR(t->log_density(beta), 3.0 * std::log(0.5) + 2.0 * norm_lpdf(0.0, 0.0, 1.0), 1e-12);
}

TEST(Targets, AllBuiltinsPassFiniteDifferenceChecks) {
  std::mt19937_64 rng(1234);
  expect_fd_gradient(std_normal_target(4), rng, 3.0);
  expect_fd_gradient(*make_target("mvn", {{"mu", {1.0, -1.0}}, {"cov", {{2.0, 0.3}, {0.3, 0.5}}}}), rng, 3.0);
  expect_fd_gradient(neal_funnel_target(5), rng, 2.0);
  expect_fd_gradient(eight_schools_target(true), rng, 2.0);
  expect_fd_gradient(eight_schools_target(false), rng, 2.0);
  expect_fd_gradient(*make_target("logistic_regression", {{"dim", 4}, {"n", 30}}), rng, 2.0);
}

TEST(Targets, CountersIncrementOncePerCall) {
  neal_funnel_target t(3);
  for (int k = 1; k <= 7; ++k) {
    t.log_density_gradient(VectorXd::Constant(3, 0.1 * k));
    EXPECT_EQ(t.logp_evals(), static_cast<std::uint64_t>(k));
    EXPECT_EQ(t.grad_evals(), static_cast<std::uint64_t>(k));
  }
  t.log_density(VectorXd::Zero(3));
  EXPECT_EQ(t.logp_evals(), 8u);
  EXPECT_EQ(t.grad_evals(), 7u);
}

TEST(Targets, DimensionMismatchAndNonFinite) {
  std_normal_target t(3);
  EXPECT_THROW(t.log_density_gradient(VectorXd::Zero(2)), dimension_mismatch);
  VectorXd bad = VectorXd::Zero(3);
  bad[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(t.log_density_gradient(bad), non_finite_error);
  neal_funnel_target f(2);
  // exp(-tau) overflows far down the neck.
  EXPECT_THROW(f.log_density_gradient(VectorXd{{-800.0, 1.0}}), non_finite_error);
}

TEST(Targets, FactoryErrors) {
  EXPECT_THROW(make_target("nosuch", {}), unknown_target);
  EXPECT_THROW(make_target("std_normal", nlohmann::json::object()), bad_params);
  EXPECT_THROW(make_target("std_normal", {{"dim", 2}, {"extra", 1}}), bad_params);
  EXPECT_THROW(make_target("neal_funnel", {{"dim", 1}}), bad_params);
  EXPECT_THROW(make_target("eight_schools_centered", {{"dim", 3}}), bad_params);
  EXPECT_THROW(make_target("mvn", {{"mu", {0.0, 0.0}}, {"cov", {{1.0}}}}), bad_params);
  for (const auto& name : target_names()) {
    nlohmann::json p = nlohmann::json::object();
    if (name == "std_normal" || name == "mvn" || name == "neal_funnel") p["dim"] = 3;
    EXPECT_NO_THROW(make_target(name, p)) << name;
  }
}
