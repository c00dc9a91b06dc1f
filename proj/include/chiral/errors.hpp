#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace chiral {

/// Base of every error raised by the physics modules. The CLI maps these to exit code 3.
class PhysicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidMaterialError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class DegenerateMaterialError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class UnsupportedPortError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class UndefinedRotationError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class GeometryError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class ResolutionError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class CapacityError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class AssemblyError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class ConvergenceError : public PhysicsError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : PhysicsError(what), history_(std::move(history)) {}

  /// Relative residual recorded at each checkpoint of the iteration.
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Raised when too many scan cells fail; maps to exit code 4.
class ScanAbortedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-schema configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chiral
