#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfcal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or precondition violation (bad sizes, bounds, counts).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Matrix/vector shapes or layer widths do not chain.
class ShapeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Non-finite input where a finite value is required.
class DomainError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// A statistic or loss is undefined for the given input (zero variance,
/// empty mask, single sample).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced inside a numeric kernel.
class NumericOverflowError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(std::size_t epoch, const std::string& what)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Failure of one member at one stage of a calibration cascade.
class CascadeError : public Error {
 public:
  CascadeError(std::size_t member, std::string stage, const std::string& what)
      : Error(what), member_(member), stage_(std::move(stage)) {}
  std::size_t member() const noexcept { return member_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::size_t member_;
  std::string stage_;
};

/// Malformed text input. `line` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfcal
