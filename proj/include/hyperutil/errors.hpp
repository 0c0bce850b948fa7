#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hyperutil {

// Schema does not match the data or is internally inconsistent.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A data row could not be parsed. `row` is the 0-based data row index.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

// Non-finite loss or gradient during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model file is malformed, truncated, or from an unsupported version.
class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hyperutil
