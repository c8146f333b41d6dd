#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace log2ns {

// Base class for every error raised by the library. Callers that only need a
// message catch this; the subclasses exist so the CLI and HTTP layer can map
// failures onto exit codes and status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input has the wrong shape: missing mandatory columns, unknown fields.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Firewall configuration could not be resolved (unknown names, cycles, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A query string failed to parse. `position` is a 0-based byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)),
        message_(what),
        position_(position) {}

  const std::string& message() const { return message_; }
  std::size_t position() const { return position_; }

 private:
  std::string message_;
  std::size_t position_;
};

// A token, rule, or artifact was looked up by name and does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Arguments violate an operation's precondition (k too large, eta < 2, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace log2ns
