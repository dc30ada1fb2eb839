#pragma once

#include <stdexcept>
#include <string>

namespace uavmpc {

/// Raised when a config value violates its documented invariant.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when obstacle placement cannot be satisfied within the attempt budget.
class ScenarioInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or format mismatch (network inputs, parameter files, checkpoints).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uavmpc
