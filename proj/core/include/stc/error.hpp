#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stc {

// Base class for domain errors. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input text could not be turned into a trajectory at all (empty input).
class ParseError : public Error {
 public:
  using Error::Error;
};

// A precondition on caller-supplied data was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite value at a known token position.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t token_index)
      : Error(what + " (token " + std::to_string(token_index) + ")"),
        token_index_(token_index) {}

  std::size_t token_index() const noexcept { return token_index_; }

 private:
  std::size_t token_index_;
};

}  // namespace stc
