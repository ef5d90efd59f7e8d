#pragma once

#include <stdexcept>
#include <string>

namespace wfa {

// Root of every error the library throws. The CLI maps each family to an
// exit code (see tools/wfa_cli.cpp).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct ArgumentError : Error {
  using Error::Error;
};

// Values outside a function's mathematical domain (negative consumption,
// zero actuals in MAPE, constant features in Min-Max scaling).
struct DomainError : Error {
  using Error::Error;
};

// Malformed or non-daily input data.
struct DataError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct TrainingDivergedError : NumericError {
  TrainingDivergedError(std::size_t epoch, const std::string& what)
      : NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch(epoch) {}
  std::size_t epoch;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace wfa
