#pragma once

#include <stdexcept>
#include <string>

namespace sprl {

// Caller passed something structurally invalid (bad sizes, bad arguments).
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer shape disagreement; message names the offending layer or op.
class DimensionError : public UsageError {
 public:
  explicit DimensionError(const std::string& msg) : UsageError(msg) {}
};

// NaN/Inf where finite values are required; message names the parameter.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// File format/IO failures (bad magic, version mismatch, checksum, truncation).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Procedural generation exhausted its retry budget without a valid result.
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Path planning failed (goal unreachable from start).
class PlanningError : public std::runtime_error {
 public:
  explicit PlanningError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sprl
