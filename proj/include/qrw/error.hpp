#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qrw {

// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyText : public Error {
 public:
  EmptyText() : Error("empty or all-whitespace text") {}
};

// Malformed input line. `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class EmptyContext : public Error {
 public:
  EmptyContext() : Error("context has no tokens") {}
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity in an activation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace qrw
