// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace proteus {

/// Base error. Each subclass maps to one process exit code in the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Bad configuration or arguments (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Bad or incompatible data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

/// Knowledge-base file carries a format version this build does not read.
class VersionError : public DataError {
 public:
  using DataError::DataError;
};

/// Structurally valid file whose contents violate an invariant (shape, SPD).
class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

/// Numerical failure such as a non-SPD matrix during factorization (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Prefixes another error with its location and keeps its exit code.
class ContextError : public Error {
 public:
  ContextError(const std::string& context, const Error& inner)
      : Error(context + ": " + inner.what()), code_(inner.exit_code()) {}
  int exit_code() const noexcept override { return code_; }

 private:
  int code_;
};

}  // namespace proteus
