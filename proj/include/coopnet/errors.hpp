#pragma once

#include <stdexcept>
#include <string>

namespace coopnet {

// Base of every error thrown by the library. The CLI maps ValidationError
// (and its subclasses) to exit code 2, everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidMix : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnknownPolicyName : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConnectivityFailure : public Error {
 public:
  using Error::Error;
};

class UnknownNode : public Error {
 public:
  using Error::Error;
};

class NotNeighbors : public Error {
 public:
  using Error::Error;
};

class IsolatedFocusNode : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class NoValidAction : public Error {
 public:
  using Error::Error;
};

class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace coopnet
