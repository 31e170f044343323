#pragma once

#include <stdexcept>
#include <string>

namespace recown {

// Base class for every error this library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (log of a
// non-positive number, division guard tripped, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller violated an API precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Bad user-supplied data: too short, empty, constant, inconsistent.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; carries the offending line number.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Checkpoint file damaged or written by an incompatible version.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

class VersionError : public CorruptionError {
 public:
  using CorruptionError::CorruptionError;
};

// Invalid run configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace recown
