#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mltcn {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A factorization, log or exponent produced something unusable.
class NumericalBreakdown : public Error {
 public:
  using Error::Error;
};

// Parameter values outside their admissible domain.
class ParameterDomain : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimension : public Error {
 public:
  using Error::Error;
};

class EmptyComponent : public Error {
 public:
  EmptyComponent(std::size_t group, const std::string& what)
      : Error(what), group_(group) {}
  std::size_t group() const noexcept { return group_; }

 private:
  std::size_t group_;
};

class FitFailed : public Error {
 public:
  using Error::Error;
};

class SelectionFailed : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(row) + ", column " +
              std::to_string(column) + ": " + what),
        row_(row),
        column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace mltcn
