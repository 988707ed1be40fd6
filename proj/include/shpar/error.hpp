#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shpar {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the frontend for input it cannot tokenize.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Raised when loading annotation files.
class AnnotationError : public Error {
 public:
  using Error::Error;
};

}  // namespace shpar
