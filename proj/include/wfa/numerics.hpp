#pragma once

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wfa/errors.hpp"

namespace wfa {

// Dense column vector of doubles.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> v) : data_(v) {}
  explicit Vector(std::vector<double> v) : data_(std::move(v)) {}

  std::size_t size() const { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

namespace detail {

inline void require_finite(std::span<const double> xs, const char* op) {
  if (!all_finite(xs)) throw NumericError(std::string(op) + " produced a non-finite value");
}

template <typename T, typename F>
T map_unary(T x, F f, const char* op) {
  for (double& v : x.values()) v = f(v);
  require_finite(x.values(), op);
  return x;
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

inline void require_same_shape(const Vector& a, const Vector& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

template <typename T, typename F>
T map_binary(T a, const T& b, F f, const char* op) {
  require_same_shape(a, b, op);
  auto out = a.values();
  auto rhs = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i], rhs[i]);
  require_finite(a.values(), op);
  return a;
}

}  // namespace detail

template <typename T>
concept Dense = std::same_as<T, Matrix> || std::same_as<T, Vector>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double tanh(double x) { return std::tanh(x); }

// sign(0) = 0.
inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

template <Dense T>
T sigmoid(T x) { return detail::map_unary(std::move(x), [](double v) { return sigmoid(v); }, "sigmoid"); }

template <Dense T>
T tanh(T x) { return detail::map_unary(std::move(x), [](double v) { return std::tanh(v); }, "tanh"); }

template <Dense T>
T sign(T x) { return detail::map_unary(std::move(x), [](double v) { return sign(v); }, "sign"); }

template <Dense T>
T add(T a, const T& b) { return detail::map_binary(std::move(a), b, std::plus<>{}, "add"); }

template <Dense T>
T sub(T a, const T& b) { return detail::map_binary(std::move(a), b, std::minus<>{}, "sub"); }

// Hadamard product.
template <Dense T>
T mul(T a, const T& b) { return detail::map_binary(std::move(a), b, std::multiplies<>{}, "mul"); }

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + a.shape_str() + " x " + b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  detail::require_finite(out.values(), "matmul");
  return out;
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw ShapeError("matvec: shape mismatch " + a.shape_str() + " x " + std::to_string(x.size()));
  }
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    auto r = a.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) s += r[k] * x[k];
    out[i] = s;
  }
  detail::require_finite(out.values(), "matvec");
  return out;
}

/// Seedable generator. The engine is std::mt19937_64 (a fully specified
/// algorithm in the C++ standard, so draws replay identically on every
/// conforming platform). Distributions are implemented here rather than
/// with <random>'s distribution classes, whose algorithms are unspecified:
///   uniform01 = (next() >> 11) * 2^-53
///   normal    = Box-Muller on two uniform01 draws, no caching
///   index(n)  = rejection sampling on next()
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw ArgumentError("uniform: invalid range [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
    }
    double v = lo + uniform01() * (hi - lo);
    return v < hi ? v : std::nextafter(hi, lo);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw ArgumentError("index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return static_cast<std::size_t>(v % bound);
  }

  // Index i with probability weights[i] / sum(weights).
  std::size_t choice_weighted(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("choice_weighted: weights must be finite and >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw ArgumentError("choice_weighted: weights sum to zero");
    const double target = uniform01() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last_positive = i;
      acc += weights[i];
      if (target < acc) return i;
    }
    return last_positive;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace wfa
