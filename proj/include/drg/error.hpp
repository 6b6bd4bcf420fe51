#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drg {

/// Base of every error thrown by the library. `exit_code()` is the CLI status
/// the error maps to (2 validation, 3 data/format).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Input data is unusable (empty mesh, non-finite target, open mesh...).
class DataError : public Error {
public:
  using Error::Error;
};

class LookupError : public ContractError {
public:
  using ContractError::ContractError;
};

/// Malformed XML. Carries the 1-based line of the failure.
class ParseError : public DataError {
public:
  ParseError(const std::string& msg, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Well-formed URDF that does not describe a usable kinematic tree.
class StructuralError : public DataError {
public:
  using DataError::DataError;
};

/// Geometry too degenerate to solve (coplanar references, collinear link points).
class DegeneracyError : public DataError {
public:
  using DataError::DataError;
};

/// Binary file that fails to decode. Carries the byte offset of the failure.
class FormatError : public DataError {
public:
  FormatError(const std::string& msg, std::size_t offset)
      : DataError("byte " + std::to_string(offset) + ": " + msg), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

}  // namespace drg
