#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace rodeepc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base of every exception thrown by the library. `kind()` is a stable
/// machine-readable tag ("dimension", "shape", ...) used by the CLI error record.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message);
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& m) : Error("domain", m) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& m) : Error("protocol", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

class DataGenerationError : public Error {
 public:
  explicit DataGenerationError(const std::string& m) : Error("data_generation", m) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& m) : Error("solver", m) {}
};

class SimulationError : public Error {
 public:
  SimulationError(const std::string& m, std::int64_t step);
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace rodeepc
