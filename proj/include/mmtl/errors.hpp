#pragma once

#include <stdexcept>
#include <string>

namespace mmtl {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, out-of-range value).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidLabel : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InvalidTask : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ShapeMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Input data could not be read or failed validation.
class DataError : public Error {
 public:
  using Error::Error;
};

class MissingColumnError : public DataError {
 public:
  using DataError::DataError;
};

class NonNumericCellError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyTaskError : public DataError {
 public:
  using DataError::DataError;
};

class CorruptIdxError : public DataError {
 public:
  using DataError::DataError;
};

/// The solver produced a non-finite objective.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// No meta-replicate admitted a gamma-feasible representation.
class InconclusiveError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmtl
