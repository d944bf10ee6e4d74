#ifndef PATHFINDER_TARGETS_HPP
#define PATHFINDER_TARGETS_HPP

#include <Eigen/Dense>

#include <json.hpp>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace pathfinder {

inline constexpr double log_two_pi = 1.8378770664093454835606594728112;

struct value_and_gradient {
  double logp;
  Eigen::VectorXd grad;
};

/**
 * A differentiable, possibly unnormalized log density on R^N.
 *
 * Two entry points are exposed. log_density_gradient() is the fused call used
 * by the optimizer; it bumps both counters and rejects non-finite results.
 * log_density() evaluates the value only, bumps only the log-density counter
 * and returns non-finite values as-is so Monte Carlo callers can disqualify
 * the draw themselves.
 *
 * Counters are atomic, so one target can be shared by many workers.
 */
class log_density_target {
 public:
  explicit log_density_target(Eigen::Index dim) : dim_(dim) {
    if (dim < 1) throw bad_params("target dimension must be positive");
  }
  virtual ~log_density_target() = default;

  log_density_target(const log_density_target&) = delete;
  log_density_target& operator=(const log_density_target&) = delete;

  Eigen::Index dim() const noexcept { return dim_; }
  virtual std::string name() const = 0;

  value_and_gradient log_density_gradient(const Eigen::VectorXd& theta) const {
    check_dim(theta);
    n_logp_.fetch_add(1, std::memory_order_relaxed);
    n_grad_.fetch_add(1, std::memory_order_relaxed);
    value_and_gradient out{0.0, Eigen::VectorXd::Zero(dim_)};
    out.logp = evaluate(theta, &out.grad);
    if (!std::isfinite(out.logp) || !out.grad.allFinite()) {
      throw non_finite_error("non-finite log density or gradient");
    }
    return out;
  }

  double log_density(const Eigen::VectorXd& theta) const {
    check_dim(theta);
    n_logp_.fetch_add(1, std::memory_order_relaxed);
    return evaluate(theta, nullptr);
  }

  std::uint64_t logp_evals() const noexcept {
    return n_logp_.load(std::memory_order_relaxed);
  }
  std::uint64_t grad_evals() const noexcept {
    return n_grad_.load(std::memory_order_relaxed);
  }
  void reset_counters() noexcept {
    n_logp_.store(0);
    n_grad_.store(0);
  }

 protected:
  /// Returns log p(theta); writes the gradient when `grad` is non-null.
  /// `grad` arrives sized to dim().
  virtual double evaluate(const Eigen::VectorXd& theta,
                          Eigen::VectorXd* grad) const = 0;

 private:
  void check_dim(const Eigen::VectorXd& theta) const {
    if (theta.size() != dim_) {
      throw dimension_mismatch("expected a vector of length " +
                               std::to_string(dim_) + ", got " +
                               std::to_string(theta.size()));
    }
  }

  Eigen::Index dim_;
  mutable std::atomic<std::uint64_t> n_logp_{0};
  mutable std::atomic<std::uint64_t> n_grad_{0};
};

namespace detail {

inline double normal_lpdf(double y, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * log_two_pi;
}

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Standard normal on R^N, normalized.
class std_normal_target final : public log_density_target {
 public:
  using log_density_target::log_density_target;
  std::string name() const override { return "std_normal"; }

 protected:
  double evaluate(const Eigen::VectorXd& x,
                  Eigen::VectorXd* grad) const override {
    if (grad) *grad = -x;
    return -0.5 * x.squaredNorm() - 0.5 * static_cast<double>(dim()) * log_two_pi;
  }
};

/// Multivariate normal with dense SPD covariance, normalized.
class mvn_target final : public log_density_target {
 public:
  mvn_target(Eigen::VectorXd mu, const Eigen::MatrixXd& cov)
      : log_density_target(mu.size()), mu_(std::move(mu)) {
    if (cov.rows() != mu_.size() || cov.cols() != mu_.size()) {
      throw bad_params("mvn: covariance must be " +
                       std::to_string(mu_.size()) + "x" +
                       std::to_string(mu_.size()));
    }
    if (!cov.allFinite() || !mu_.allFinite()) {
      throw bad_params("mvn: non-finite mean or covariance");
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw bad_params("mvn: covariance is not symmetric");
    }
    llt_.compute(cov);
    if (llt_.info() != Eigen::Success ||
        (llt_.matrixL().toDenseMatrix().diagonal().array() <= 0).any()) {
      throw bad_params("mvn: covariance is not positive definite");
    }
    log_norm_ = -0.5 * static_cast<double>(dim()) * log_two_pi -
                llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  std::string name() const override { return "mvn"; }
  const Eigen::VectorXd& mean() const noexcept { return mu_; }

 protected:
  double evaluate(const Eigen::VectorXd& x,
                  Eigen::VectorXd* grad) const override {
    const Eigen::VectorXd d = x - mu_;
    const Eigen::VectorXd w = llt_.matrixL().solve(d);
    if (grad) *grad = -llt_.matrixU().solve(w);
    return log_norm_ - 0.5 * w.squaredNorm();
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_norm_ = 0.0;
};

/// Neal's funnel: tau ~ normal(0, 3), beta_n ~ normal(0, exp(tau / 2)) for
/// n = 1..dim-1. Coordinate 0 is tau.
class neal_funnel_target final : public log_density_target {
 public:
  explicit neal_funnel_target(Eigen::Index dim) : log_density_target(dim) {
    if (dim < 2) throw bad_params("neal_funnel: dim must be at least 2");
  }
  std::string name() const override { return "neal_funnel"; }

 protected:
  double evaluate(const Eigen::VectorXd& x,
                  Eigen::VectorXd* grad) const override {
    const double tau = x[0];
    const auto beta = x.tail(dim() - 1);
    const double n_beta = static_cast<double>(dim() - 1);
    const double inv_var = std::exp(-tau);
    const double sum_sq = beta.squaredNorm();
    const double lp = detail::normal_lpdf(tau, 0.0, 3.0) - 0.5 * sum_sq * inv_var -
                      0.5 * n_beta * tau - 0.5 * n_beta * log_two_pi;
    if (grad) {
      (*grad)[0] = -tau / 9.0 + 0.5 * sum_sq * inv_var - 0.5 * n_beta;
      grad->tail(dim() - 1) = -beta * inv_var;
    }
    return lp;
  }
};

/// The eight schools hierarchical model on the unconstrained scale:
/// mu ~ normal(0, 5), tau ~ half-cauchy(0, 5) sampled as log(tau) with its
/// Jacobian, y_j ~ normal(theta_j, sigma_j).
///
/// Coordinates: 0 = mu, 1 = log(tau), 2..9 = theta (centered) or the
/// standardized school effects (non-centered, theta = mu + tau * eta).
class eight_schools_target final : public log_density_target {
 public:
  static constexpr std::array<double, 8> y = {28, 8, -3, 7, -1, 1, 18, 12};
  static constexpr std::array<double, 8> sigma = {15, 10, 16, 11,
                                                  9,  11, 10, 18};

  explicit eight_schools_target(bool centered)
      : log_density_target(10), centered_(centered) {}

  std::string name() const override {
    return centered_ ? "eight_schools_centered" : "eight_schools_noncentered";
  }
  bool centered() const noexcept { return centered_; }

 protected:
  double evaluate(const Eigen::VectorXd& x,
                  Eigen::VectorXd* grad) const override {
    const double mu = x[0];
    const double log_tau = x[1];
    const double tau = std::exp(log_tau);
    const double ratio_sq = (tau / 5.0) * (tau / 5.0);

    // half-cauchy(0, 5) plus log |d tau / d log_tau|
    double lp = detail::normal_lpdf(mu, 0.0, 5.0) + std::log(2.0) -
                std::log(std::numbers::pi) - std::log(5.0) -
                std::log1p(ratio_sq) + log_tau;
    double d_mu = -mu / 25.0;
    double d_log_tau = -2.0 * ratio_sq / (1.0 + ratio_sq) + 1.0;

    for (int j = 0; j < 8; ++j) {
      const double v = x[2 + j];
      const double s2 = sigma[j] * sigma[j];
      if (centered_) {
        const double dev = v - mu;
        lp += detail::normal_lpdf(v, mu, tau) + detail::normal_lpdf(y[j], v, sigma[j]);
        d_mu += dev / (tau * tau);
        d_log_tau += -1.0 + dev * dev / (tau * tau);
        if (grad) (*grad)[2 + j] = -dev / (tau * tau) + (y[j] - v) / s2;
      } else {
        const double resid = y[j] - mu - tau * v;
        lp += detail::normal_lpdf(v, 0.0, 1.0) +
              detail::normal_lpdf(y[j], mu + tau * v, sigma[j]);
        d_mu += resid / s2;
        d_log_tau += resid / s2 * tau * v;
        if (grad) (*grad)[2 + j] = -v + resid * tau / s2;
      }
    }
    if (grad) {
      (*grad)[0] = d_mu;
      (*grad)[1] = d_log_tau;
    }
    return lp;
  }

 private:
  bool centered_;
};

/// Bernoulli-logit regression without intercept and independent
/// normal(0, prior_scale) priors on the coefficients.
class logistic_regression_target final : public log_density_target {
 public:
  logistic_regression_target(Eigen::MatrixXd x, Eigen::VectorXd y,
                             double prior_scale = 1.0)
      : log_density_target(x.cols()),
        x_(std::move(x)),
        y_(std::move(y)),
        prior_scale_(prior_scale) {
    if (x_.rows() < 1) throw bad_params("logistic_regression: X has no rows");
    if (y_.size() != x_.rows()) {
      throw bad_params("logistic_regression: y has " +
                       std::to_string(y_.size()) + " entries but X has " +
                       std::to_string(x_.rows()) + " rows");
    }
    if (!x_.allFinite()) throw bad_params("logistic_regression: X not finite");
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      if (y_[i] != 0.0 && y_[i] != 1.0) {
        throw bad_params("logistic_regression: y must be 0 or 1");
      }
    }
    if (!(prior_scale_ > 0.0) || !std::isfinite(prior_scale_)) {
      throw bad_params("logistic_regression: prior_scale must be positive");
    }
  }

  std::string name() const override { return "logistic_regression"; }
  const Eigen::MatrixXd& design() const noexcept { return x_; }
  const Eigen::VectorXd& outcomes() const noexcept { return y_; }

 protected:
  double evaluate(const Eigen::VectorXd& beta,
                  Eigen::VectorXd* grad) const override {
    const Eigen::VectorXd eta = x_ * beta;
    double lp = 0.0;
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      lp += y_[i] * eta[i] - detail::log1p_exp(eta[i]);
      resid[i] = y_[i] - detail::inv_logit(eta[i]);
    }
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      lp += detail::normal_lpdf(beta[j], 0.0, prior_scale_);
    }
    if (grad) {
      *grad = x_.transpose() * resid - beta / (prior_scale_ * prior_scale_);
    }
    return lp;
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  double prior_scale_;
};

inline const std::vector<std::string>& target_names() {
  static const std::vector<std::string> names = {
      "std_normal",   "mvn", "neal_funnel", "eight_schools_centered",
      "eight_schools_noncentered", "logistic_regression"};
  return names;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& params,
                                std::string_view target,
                                std::initializer_list<std::string_view> allowed) {
  for (const auto& item : params.items()) {
    bool known = false;
    for (auto a : allowed) known = known || item.key() == a;
    if (!known) {
      throw bad_params(std::string(target) + ": unknown parameter '" +
                       item.key() + "'");
    }
  }
}

inline Eigen::Index read_dim(const nlohmann::json& params, std::string_view target) {
  if (!params.contains("dim")) {
    throw bad_params(std::string(target) + ": 'dim' is required");
  }
  const auto& d = params.at("dim");
  if (!d.is_number_integer() || d.get<long long>() < 1) {
    throw bad_params(std::string(target) + ": 'dim' must be a positive integer");
  }
  return static_cast<Eigen::Index>(d.get<long long>());
}

inline Eigen::VectorXd read_vector(const nlohmann::json& j, std::string_view what) {
  if (!j.is_array()) throw bad_params(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw bad_params(std::string(what) + " must contain numbers");
    }
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd read_matrix(const nlohmann::json& j, std::string_view what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw bad_params(std::string(what) + " must be a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw bad_params(std::string(what) + " rows must all have length " +
                       std::to_string(cols));
    }
    m.row(r) = read_vector(row, what).transpose();
  }
  return m;
}

/// Deterministic synthetic design: standard-normal covariates and outcomes
/// drawn from the logistic model at coefficients 1, -1, 1, ...
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> synthetic_logistic_data(
    Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  Eigen::VectorXd coef(d);
  for (Eigen::Index j = 0; j < d; ++j) coef[j] = (j % 2 == 0) ? 1.0 : -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = normal(rng);
    y[i] = unif(rng) < inv_logit(x.row(i).dot(coef)) ? 1.0 : 0.0;
  }
  return {std::move(x), std::move(y)};
}

}  // namespace detail

/**
 * Builds a target from the built-in zoo.
 *
 * Parameter blocks (all keys optional unless noted):
 *   std_normal                 {"dim" (required)}
 *   mvn                        {"mu", "cov" | "sd", "dim"}; with only "dim",
 *                              the mean is 0 and the covariance I
 *   neal_funnel                {"dim" (required, >= 2)}
 *   eight_schools_*            {"dim" (must be 10 if given)}
 *   logistic_regression        {"X", "y", "prior_scale"} or synthetic data
 *                              via {"dim", "n", "data_seed", "prior_scale"}
 */
inline std::unique_ptr<log_density_target> make_target(
    const std::string& name, const nlohmann::json& params = nlohmann::json::object()) {
  using detail::reject_unknown_keys;
  if (!params.is_object() && !params.is_null()) {
    throw bad_params(name + ": parameters must be a JSON object");
  }
  const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;

  if (name == "std_normal") {
    reject_unknown_keys(p, name, {"dim"});
    return std::make_unique<std_normal_target>(detail::read_dim(p, name));
  }
  if (name == "mvn") {
    reject_unknown_keys(p, name, {"dim", "mu", "cov", "sd"});
    if (p.contains("cov") && p.contains("sd")) {
      throw bad_params("mvn: give either 'cov' or 'sd', not both");
    }
    Eigen::VectorXd mu;
    if (p.contains("mu")) {
      mu = detail::read_vector(p.at("mu"), "mvn: mu");
    } else if (p.contains("sd")) {
      mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.at("sd").size()));
    } else if (p.contains("cov")) {
      mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.at("cov").size()));
    } else {
      mu = Eigen::VectorXd::Zero(detail::read_dim(p, name));
    }
    if (mu.size() < 1) throw bad_params("mvn: mu must be non-empty");
    if (p.contains("dim") && detail::read_dim(p, name) != mu.size()) {
      throw bad_params("mvn: 'dim' disagrees with the length of the mean");
    }
    Eigen::MatrixXd cov;
    if (p.contains("cov")) {
      cov = detail::read_matrix(p.at("cov"), "mvn: cov");
    } else if (p.contains("sd")) {
      const Eigen::VectorXd sd = detail::read_vector(p.at("sd"), "mvn: sd");
      if (sd.size() != mu.size()) throw bad_params("mvn: sd length mismatch");
      if ((sd.array() <= 0).any()) throw bad_params("mvn: sd must be positive");
      cov = sd.array().square().matrix().asDiagonal();
    } else {
      cov = Eigen::MatrixXd::Identity(mu.size(), mu.size());
    }
    return std::make_unique<mvn_target>(std::move(mu), cov);
  }
  if (name == "neal_funnel") {
    reject_unknown_keys(p, name, {"dim"});
    return std::make_unique<neal_funnel_target>(detail::read_dim(p, name));
  }
  if (name == "eight_schools_centered" || name == "eight_schools_noncentered") {
    reject_unknown_keys(p, name, {"dim"});
    if (p.contains("dim") && detail::read_dim(p, name) != 10) {
      throw bad_params(name + ": dimension is fixed at 10");
    }
    return std::make_unique<eight_schools_target>(name == "eight_schools_centered");
  }
  if (name == "logistic_regression") {
    reject_unknown_keys(p, name, {"X", "y", "prior_scale", "dim", "n", "data_seed"});
    double scale = 1.0;
    if (p.contains("prior_scale")) {
      if (!p.at("prior_scale").is_number()) {
        throw bad_params("logistic_regression: prior_scale must be a number");
      }
      scale = p.at("prior_scale").get<double>();
    }
    if (p.contains("X") || p.contains("y")) {
      if (!p.contains("X") || !p.contains("y")) {
        throw bad_params("logistic_regression: 'X' and 'y' go together");
      }
      if (p.contains("n") || p.contains("data_seed")) {
        throw bad_params("logistic_regression: 'n'/'data_seed' only apply to synthetic data");
      }
      Eigen::MatrixXd x = detail::read_matrix(p.at("X"), "logistic_regression: X");
      if (p.contains("dim") && detail::read_dim(p, name) != x.cols()) {
        throw bad_params("logistic_regression: 'dim' disagrees with X");
      }
      return std::make_unique<logistic_regression_target>(
          std::move(x), detail::read_vector(p.at("y"), "logistic_regression: y"),
          scale);
    }
    const Eigen::Index d = p.contains("dim") ? detail::read_dim(p, name) : 3;
    Eigen::Index n = 20;
    std::uint64_t seed = 1;
    if (p.contains("n")) {
      if (!p.at("n").is_number_integer() || p.at("n").get<long long>() < 1) {
        throw bad_params("logistic_regression: 'n' must be a positive integer");
      }
      n = static_cast<Eigen::Index>(p.at("n").get<long long>());
    }
    if (p.contains("data_seed")) {
      if (!p.at("data_seed").is_number_unsigned()) {
        throw bad_params("logistic_regression: 'data_seed' must be a non-negative integer");
      }
      seed = p.at("data_seed").get<std::uint64_t>();
    }
    auto [x, y] = detail::synthetic_logistic_data(n, d, seed);
    return std::make_unique<logistic_regression_target>(std::move(x), std::move(y), scale);
  }
  throw unknown_target("unknown target '" + name + "'");
}

}  // namespace pathfinder

#endif  // PATHFINDER_TARGETS_HPP
