#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wfa/errors.hpp"

namespace wfa {

namespace detail {
inline void check_pairs(std::span<const double> y, std::span<const double> yhat, const char* what) {
  if (y.empty()) throw ArgumentError(std::string(what) + ": empty input");
  if (y.size() != yhat.size()) throw ShapeError(std::string(what) + ": length mismatch");
}
}  // namespace detail

inline double mae(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pairs(y, yhat, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

inline double rmse(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pairs(y, yhat, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

// Percent: (100 / n) * sum |(y - yhat) / y|. Every actual must be non-zero.
inline double mape(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pairs(y, yhat, "mape");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) throw DomainError("mape: actual value is zero at index " + std::to_string(i));
    s += std::abs((y[i] - yhat[i]) / y[i]);
  }
  return 100.0 * s / static_cast<double>(y.size());
}

// Physical units: liters/day for MAE and RMSE, percent for MAPE.
struct EvalReport {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
  std::size_t n = 0;

  bool operator==(const EvalReport&) const = default;
};

inline EvalReport evaluate_metrics(std::span<const double> y, std::span<const double> yhat) {
  return {mae(y, yhat), rmse(y, yhat), mape(y, yhat), y.size()};
}

}  // namespace wfa
