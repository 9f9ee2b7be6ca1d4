#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace balw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown, e.g. a Gram matrix that is not PSD.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. Row and column are 1-based; 0 means "not applicable".
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::string file, std::size_t row = 0,
                 std::string column = {})
      : Error(Format(what, file, row, column)),
        file_(std::move(file)),
        row_(row),
        column_(std::move(column)) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  static std::string Format(const std::string& what, const std::string& file, std::size_t row,
                            const std::string& column) {
    std::string msg = file + ": " + what;
    if (row > 0) msg += " (row " + std::to_string(row);
    if (!column.empty()) msg += (row > 0 ? ", column '" : " (column '") + column + "'";
    if (row > 0 || !column.empty()) msg += ")";
    return msg;
  }

  std::string file_;
  std::size_t row_;
  std::string column_;
};

/// An iterative solver ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, double last_value = 0.0)
      : Error(what + " (residual " + FormatResidual(residual) + ")"),
        residual_(residual),
        last_value_(last_value) {}

  double residual() const noexcept { return residual_; }
  /// Last quantity tracked before giving up (e.g. the last bias for a delta_min search).
  double last_value() const noexcept { return last_value_; }

 private:
  static std::string FormatResidual(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", r);
    return buf;
  }

  double residual_;
  double last_value_;
};

/// Requested bias budget is at or below the smallest achievable bias.
class InfeasibleBiasError : public Error {
 public:
  InfeasibleBiasError(double requested, double delta_min)
      : Error("bias budget " + Format(requested) + " is not above the minimum achievable bias " +
              Format(delta_min)),
        requested_(requested),
        delta_min_(delta_min) {}

  double requested() const noexcept { return requested_; }
  double delta_min() const noexcept { return delta_min_; }

 private:
  static std::string Format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

  double requested_;
  double delta_min_;
};

}  // namespace balw
