#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace msdwr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: unknown problem id, bad step sizes, malformed config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A mesh lacks the structure an operation needs (patches, even micro counts).
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Arguments that belong together do not match (e.g. orbit anchored elsewhere).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Internal bookkeeping is inconsistent, e.g. a missing orbit cache entry.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Base for failures of an iterative or linear solve.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Periodic cycling did not reach the requested periodicity defect.
class PeriodicConvergenceError : public SolverError {
 public:
  PeriodicConvergenceError(const std::string& what, double final_defect, int cycles)
      : SolverError(what), final_defect_(final_defect), cycles_(cycles) {}
  double final_defect() const noexcept { return final_defect_; }
  int cycles() const noexcept { return cycles_; }

 private:
  double final_defect_;
  int cycles_;
};

/// I - M is numerically singular for a period map M (lost damping).
class DegenerateMonodromyError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// A Newton iteration failed to reach its tolerance.
class NewtonError : public SolverError {
 public:
  NewtonError(const std::string& what, std::size_t location, std::vector<double> history)
      : SolverError(what), location_(location), history_(std::move(history)) {}
  /// Interval (macro) or step index (resolved) where the failure happened.
  std::size_t location() const noexcept { return location_; }
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::size_t location_;
  std::vector<double> history_;
};

}  // namespace msdwr
