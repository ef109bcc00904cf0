#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace locabc {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched vector or matrix dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its documented range (counts, fractions, options).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A fit was asked to use fewer rows than it can support.
class TooFewSamplesError : public Error {
 public:
  using Error::Error;
};

/// The simulator produced a non-finite latent state.
class SimulationFailure : public Error {
 public:
  using Error::Error;
};

/// Every summary column has zero variance.
class UnusableTableError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid file whose content is inconsistent (empty, wrong dimensions, bad magic).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line and column of the offending cell.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

}  // namespace locabc
