#pragma once

#include <stdexcept>
#include <string>

namespace spmvd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The directional normalizer c is (numerically) zero, so P+ and P- are undefined.
class DegenerateDirection : public Error {
 public:
  using Error::Error;
};

/// Sampler data with c != d + sum(beta_i * a_i).
class NormalizationViolation : public Error {
 public:
  using Error::Error;
};

/// Exact enumeration requested beyond the supported number of free nodes.
class SizeLimit : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace spmvd
