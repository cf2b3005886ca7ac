#pragma once

#include <stdexcept>
#include <string>

namespace topicforge {

// Runtime failure (I/O, malformed data, numerical degeneracy).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input or configuration detected before any work is done.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Parse failure that knows where it happened.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace topicforge
