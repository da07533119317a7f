#pragma once

#include <stdexcept>
#include <string>

namespace unimask {

// Root of every exception thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that cannot be combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Out-of-range scalar parameters (mask counts, probabilities, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Rotation inputs that do not define a frame (zero or parallel columns).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// A joint channel without a single visible frame.
class UnfillableChannelError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input files. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf during training or evaluation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace unimask
