#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace compm {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or matrix extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value reached a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition of an operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Class label outside [0, num_classes).
class LabelError : public Error {
 public:
  LabelError(const std::string& what, long long index) : Error(what), index_(index) {}
  long long index() const noexcept { return index_; }

 private:
  long long index_;
};

/// Model, run, or taxonomy configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A conversation has more participants than the speaker-token pool.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Label not known to a taxonomy, or missing from a grouping.
class TaxonomyError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace compm
