#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modalsav {

// Raised when physical or scaled string parameters violate their invariants.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A non-finite value appeared in the solver state.
class SolverDiverged : public std::runtime_error {
 public:
  SolverDiverged(std::size_t step, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Corrupt, truncated or mismatched binary/manifest files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Relative metrics against a target with zero energy.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace modalsav
