#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace moranfilt {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad input: a violated precondition, out-of-range parameter or malformed
/// data. The CLI maps these to exit code 2.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A numerical stage could not produce a result (degenerate geometry,
/// singular systems, optimizer failure). The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
  NumericalError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

class CollinearityError : public NumericalError {
public:
  CollinearityError(const std::string& what, std::vector<long> columns)
      : NumericalError("least squares", what), columns_(std::move(columns)) {}

  /// Regressor columns (index into [X, E_selected]) found to be dependent.
  const std::vector<long>& columns() const noexcept { return columns_; }

private:
  std::vector<long> columns_;
};

}  // namespace moranfilt
