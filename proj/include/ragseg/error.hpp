#pragma once

#include <stdexcept>
#include <string>

namespace ragseg {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a precondition or a domain invariant
/// (bad shapes, out-of-range mask scores, k larger than the database...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A serialized file is malformed: bad magic, truncation, CRC mismatch.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// The operating system refused a read or a write.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ragseg
