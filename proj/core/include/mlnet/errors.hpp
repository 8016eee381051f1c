#pragma once

#include <stdexcept>
#include <string>

namespace mlnet {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimensions do not line up.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// A precondition on the argument domain was violated.
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf where a finite value is required.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

struct IndexError : Error {
  explicit IndexError(const std::string& msg) : Error(msg) {}
};

// Malformed input file; message carries the line number when known.
struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace mlnet
