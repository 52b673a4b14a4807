#pragma once

#include <stdexcept>
#include <string>

namespace scanstat {

// Bad input data or configuration. CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed (non-PSD matrix, overflow, divergence). CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Covariance matrix could not be factored even with the largest jitter.
class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(const std::string& what, std::size_t minor)
      : NumericalError(what), minor_(minor) {}
  // 1-based index of the leading minor that failed.
  std::size_t minor() const noexcept { return minor_; }

 private:
  std::size_t minor_;
};

}  // namespace scanstat
