#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdpp {

using ItemId = std::string;
using UserId = std::string;

// Floor applied to non-positive relevance scores so every candidate keeps a
// strictly positive kernel diagonal.
inline constexpr double kMinRelevance = 1e-6;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (empty catalog, bad split ratio...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data.
class IngestError : public Error {
 public:
  using Error::Error;
};

// Caller passed arguments outside an operation's domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Problem too large for a dense code path.
class SizeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdpp
