#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pctl {

/// Shapes of two operands disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation (non-finite entries,
/// nonpositive weights, out-of-range percentile counts, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what, std::size_t slot = npos)
      : std::domain_error(what), slot_(slot) {}

  /// Rate slot that triggered the error, or npos when not slot-specific.
  std::size_t slot() const noexcept { return slot_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t slot_;
};

/// A decision variable violates its feasible set on entry to a solver.
class InfeasibleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The inner solver hit a non-finite value or gradient.
class SolverAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration; `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& msg)
      : std::invalid_argument(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pctl
