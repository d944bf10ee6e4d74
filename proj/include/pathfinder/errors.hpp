#ifndef PATHFINDER_ERRORS_HPP
#define PATHFINDER_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace pathfinder {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A log density or gradient evaluated to NaN or infinity.
class non_finite_error : public error {
 public:
  using error::error;
};

class dimension_mismatch : public error {
 public:
  using error::error;
};

class unknown_target : public error {
 public:
  using error::error;
};

class bad_params : public error {
 public:
  using error::error;
};

/// The upper-triangular matrix of inner products s_i' z_j has a
/// non-positive diagonal entry, i.e. a stored pair violates the curvature
/// condition.
class singular_e : public error {
 public:
  using error::error;
};

/// I + R gamma R' is not positive definite, so the factored covariance is
/// not SPD.
class cholesky_fail : public error {
 public:
  using error::error;
};

/// No candidate along the trajectory produced a finite ELBO.
class all_failed : public error {
 public:
  using error::error;
};

class all_paths_failed : public error {
 public:
  using error::error;
};

class no_finite_weights : public error {
 public:
  using error::error;
};

class size_limit_exceeded : public error {
 public:
  using error::error;
};

/// Invalid run configuration; `field` names the offending key.
class config_error : public error {
 public:
  config_error(std::string field, const std::string& message)
      : error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pathfinder

#endif  // PATHFINDER_ERRORS_HPP
