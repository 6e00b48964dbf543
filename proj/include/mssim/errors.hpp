#pragma once

#include <stdexcept>
#include <string>

namespace mssim {

/// Height function outside the admissible band, or a deformation that is not a diffeomorphism.
class InadmissibleHeight : public std::domain_error {
 public:
  InadmissibleHeight(const std::string& what, double attained)
      : std::domain_error(what), attained_(attained) {}
  double attained() const noexcept { return attained_; }

 private:
  double attained_;
};

/// Linear or eigen solve that did not meet its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double condition_estimate = 0.0)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Configuration or snapshot schema violation; `field` is the dotted path of the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mssim
