#pragma once

#include <stdexcept>
#include <string>

namespace cplab {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Intensity model violates positivity/boundedness (condition C4) or continuity.
class ModelInvalid : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or incomplete configuration (CLI flags, config files, threshold tables).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to meet its tolerance; carries its best estimate.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double best_estimate)
      : std::runtime_error(what), best_estimate_(best_estimate) {}

  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

}  // namespace cplab
