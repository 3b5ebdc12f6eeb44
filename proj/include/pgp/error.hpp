#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pgp {

/// Shape or size disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Violated precondition of an operation (e.g. backward from a non-scalar).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Input file content that cannot be parsed. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Parsed content referencing something that does not exist (unknown pill id, bad label).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A statistic whose denominator is empty (e.g. tf for a diagnosis never seen).
class UndefinedStatisticError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid or infeasible configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint that cannot be used with the current model. Carries the file's format version.
class CheckpointError : public ValidationError {
 public:
  CheckpointError(unsigned version, const std::string& what)
      : ValidationError("checkpoint format v" + std::to_string(version) + ": " + what), version_(version) {}
  unsigned version() const noexcept { return version_; }

 private:
  unsigned version_;
};

/// Non-finite value produced during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pgp
