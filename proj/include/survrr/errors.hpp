#pragma once

#include <stdexcept>
#include <string>

namespace survrr {

// Error taxonomy. Every throwing operation in the library uses one of these,
// so callers (and the CLI) can map failures to exit codes without string
// matching.

struct DomainError : std::invalid_argument {
  explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct FactorizationError : std::runtime_error {
  explicit FactorizationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DesignError : std::runtime_error {
  explicit DesignError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FitError : std::runtime_error {
  explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EstimationError : std::runtime_error {
  explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InferenceError : std::runtime_error {
  explicit InferenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct HarnessError : std::runtime_error {
  explicit HarnessError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace survrr
