#pragma once

#include <stdexcept>
#include <string>

namespace mvlab {

/// Invalid configuration: bad constants, shape mismatch against the space.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called with incompatible arguments (grid mismatch,
/// empty measure, index out of range).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The explicit scheme left its stability region.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, std::size_t step, double time)
      : std::runtime_error(what), step_(step), time_(time) {}
  std::size_t step() const { return step_; }
  double time() const { return time_; }

 private:
  std::size_t step_;
  double time_;
};

/// A hard invariant checked at run time did not hold.
class AssertionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mvlab
