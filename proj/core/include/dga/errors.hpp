#pragma once

#include <stdexcept>
#include <string>

namespace dga {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration (model, training, synthesis, CLI).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent dataset content.
class DataError : public Error {
 public:
  using Error::Error;
};

// File system failures and undecodable files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Misuse of the gradient tape (non-scalar loss, detached gradient request).
class AutodiffError : public Error {
 public:
  using Error::Error;
};

}  // namespace dga
