#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace marginal_evo {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An invariant on a configuration field was violated. `field()` is the
/// dotted name, e.g. "DynamicsParams.dt".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(long step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class EigenFailure : public Error {
 public:
  using Error::Error;
};

class MissingData : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class PoleError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class EmptyBand : public Error {
 public:
  using Error::Error;
};

class ZeroTheory : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace marginal_evo
