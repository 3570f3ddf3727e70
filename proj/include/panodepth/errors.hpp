#pragma once

#include <stdexcept>
#include <string>

namespace panodepth {

// Base for every library error. `exit_code()` maps onto the CLI contract:
// 1 usage, 2 data, 3 numeric.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual int exit_code() const { return 1; }
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class ManifestError : public IoError {
 public:
  using IoError::IoError;
};

class VersionError : public IoError {
 public:
  using IoError::IoError;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class AlignmentError : public MetricError {
 public:
  using MetricError::MetricError;
};

}  // namespace panodepth
