#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sebn {

// Base for every error raised by this library. Argument and state errors use
// the standard exception types (std::invalid_argument, std::logic_error).
class SebnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evidence has probability zero under the network being queried.
class ZeroProbabilityEvidence : public SebnError {
 public:
  using SebnError::SebnError;
};

class ParseError : public SebnError {
 public:
  ParseError(std::size_t line, std::string token, const std::string& what)
      : SebnError("line " + std::to_string(line) + ": " + what + " near '" + token + "'"),
        line_(line),
        token_(std::move(token)) {}

  std::size_t line() const { return line_; }
  const std::string& token() const { return token_; }

 private:
  std::size_t line_;
  std::string token_;
};

class ConfigurationError : public SebnError {
 public:
  using SebnError::SebnError;
};

class CycleError : public SebnError {
 public:
  using SebnError::SebnError;
};

class GenerationError : public SebnError {
 public:
  using SebnError::SebnError;
};

class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sebn
