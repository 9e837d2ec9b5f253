#pragma once

#include <stdexcept>
#include <string>

namespace mmvm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or dimensions do not conform.
class ConformanceError : public Error {
 public:
  using Error::Error;
};

/// A numeric function was evaluated outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or value.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite objective.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. AUROC with one class).
class DegenerateMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmvm
