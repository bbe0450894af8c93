#pragma once

#include <stdexcept>
#include <string>

namespace pipeforge {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Point sets that cannot define a plane, meshes with zero-area faces.
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyContacts : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API used out of order: stepping a finished episode, updating on an underfull buffer.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed demonstration or checkpoint file. `line` is 1-based, 0 when unknown.
class SchemaViolation : public std::runtime_error {
 public:
  SchemaViolation(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pipeforge
