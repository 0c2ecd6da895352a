#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nape {

/// Malformed expression text. `offset` is the byte offset of the failure.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Expression evaluation left its domain (log/sqrt of a nonpositive value,
/// division by zero, overflow).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A coefficient field or grid that violates a structural requirement.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: singular solve, degenerate spectrum, empty fit window.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nape
