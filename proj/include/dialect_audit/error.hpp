#pragma once

#include <stdexcept>
#include <string>

namespace dialect_audit {

// Base for every error the toolkit raises. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: schema violations, unbinnable messages, missing predictions.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters passed to an operation (threshold out of range, etc).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Unrecoverable remote-endpoint failure (authentication, unreachable config).
class RemoteError : public Error {
 public:
  using Error::Error;
};

}  // namespace dialect_audit
