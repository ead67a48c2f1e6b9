#pragma once

#include <stdexcept>
#include <string>

namespace panoscene {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument or violated precondition (exit code 5 at the CLI).
class ParameterError : public Error {
public:
  explicit ParameterError(const std::string& what) : Error(what) {}
};

/// Numerically degenerate input, e.g. a rank-deficient normal system.
class DegenerateInputError : public ParameterError {
public:
  explicit DegenerateInputError(const std::string& what) : ParameterError(what) {}
};

/// HTTP / plugin transport failure (exit code 3 at the CLI).
class TransportError : public Error {
public:
  explicit TransportError(const std::string& what) : Error(what) {}
};

/// A plugin changed pixels outside its declared write region (exit code 4).
class ContractViolationError : public Error {
public:
  explicit ContractViolationError(const std::string& what) : Error(what) {}
};

/// A pipeline stage is missing a required input artifact (exit code 2).
class MissingInputError : public Error {
public:
  explicit MissingInputError(const std::string& what) : Error(what) {}
};

}  // namespace panoscene
