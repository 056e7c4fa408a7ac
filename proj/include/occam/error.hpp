#pragma once

#include <stdexcept>
#include <string>

namespace occam {

// Error categories surfaced to the CLI; each maps to a process exit code.
// Precondition violations inside the library (dimension mismatch, degenerate
// boxes) throw std::invalid_argument instead.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kConfig = 2;
inline constexpr int kProvider = 3;
inline constexpr int kData = 4;
}  // namespace exit_code

}  // namespace occam
