#pragma once

#include <stdexcept>
#include <string>

namespace inex {

// Context or visual-token budget exceeded.
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// A scene edit references an unknown object or cannot be parsed.
struct InvalidEditError : std::runtime_error {
  explicit InvalidEditError(const std::string& msg) : std::runtime_error(msg) {}
};

// Metric requested on an input where it is mathematically undefined.
struct UndefinedMetricError : std::runtime_error {
  explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

// Transcript replay could not be completed (missing script entries etc.).
struct ReplayError : std::runtime_error {
  explicit ReplayError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace inex
