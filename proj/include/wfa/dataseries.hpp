#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wfa/errors.hpp"
#include "wfa/numerics.hpp"

namespace wfa {

using Date = std::chrono::sys_days;

// Feature order is frozen: column 0 is consumption, column 1 temperature.
inline constexpr std::size_t kConsumption = 0;
inline constexpr std::size_t kTemperature = 1;
inline constexpr std::size_t kNumFeatures = 2;

inline std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::optional<Date> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [](std::string_view part, auto& out) {
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc{} && p == part.data() + part.size();
  };
  if (!num(s.substr(0, 4), y) || !num(s.substr(5, 2), m) || !num(s.substr(8, 2), d)) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

struct RawSeries {
  std::vector<Date> dates;
  std::vector<double> consumption;  // liters/day
  std::vector<double> temperature;  // deg C

  std::size_t size() const { return dates.size(); }

  // Throws DataError / DomainError if the daily-cadence invariants do not hold.
  void validate() const {
    if (consumption.size() != dates.size() || temperature.size() != dates.size()) {
      throw DataError("series columns have unequal lengths");
    }
    if (dates.size() < 2) throw DataError("series needs at least 2 rows");
    for (std::size_t i = 0; i < size(); ++i) {
      if (i > 0 && dates[i] != dates[i - 1] + std::chrono::days{1}) {
        throw DataError("cadence error at " + format_date(dates[i]) + ": expected " +
                        format_date(dates[i - 1] + std::chrono::days{1}));
      }
      if (!std::isfinite(consumption[i]) || !std::isfinite(temperature[i])) {
        throw DataError("non-finite value at " + format_date(dates[i]));
      }
      if (consumption[i] < 0.0) {
        throw DomainError("negative consumption " + format_double(consumption[i]) + " at " + format_date(dates[i]));
      }
    }
  }

  // rows x kNumFeatures, columns [consumption, temperature].
  Matrix features() const {
    Matrix m(size(), kNumFeatures);
    for (std::size_t i = 0; i < size(); ++i) {
      m(i, kConsumption) = consumption[i];
      m(i, kTemperature) = temperature[i];
    }
    return m;
  }
};

inline constexpr std::string_view kCsvHeader = "date,consumption_l,temp_c";

inline std::string to_csv(const RawSeries& raw) {
  std::string out(kCsvHeader);
  out += '\n';
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out += format_date(raw.dates[i]);
    out += ',';
    out += format_double(raw.consumption[i]);
    out += ',';
    out += format_double(raw.temperature[i]);
    out += '\n';
  }
  return out;
}

inline void write_csv(const std::filesystem::path& path, const RawSeries& raw) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << to_csv(raw);
  if (!f) throw IoError("write failed: " + path.string());
}

inline RawSeries parse_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw DataError(source + ": bad header '" + line + "', expected '" + std::string(kCsvHeader) + "'");

  RawSeries raw;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view sv = line;
    const auto c1 = sv.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : sv.find(',', c1 + 1);
    if (c2 == std::string_view::npos || sv.find(',', c2 + 1) != std::string_view::npos) {
      throw DataError(source + ": malformed row " + std::to_string(row) + ": expected 3 fields");
    }
    auto date = parse_date(sv.substr(0, c1));
    auto cons = parse_double(sv.substr(c1 + 1, c2 - c1 - 1));
    auto temp = parse_double(sv.substr(c2 + 1));
    if (!date) throw DataError(source + ": malformed row " + std::to_string(row) + ": bad date");
    if (!cons || !temp) throw DataError(source + ": malformed row " + std::to_string(row) + ": bad number");
    raw.dates.push_back(*date);
    raw.consumption.push_back(*cons);
    raw.temperature.push_back(*temp);
  }
  raw.validate();
  return raw;
}

inline RawSeries load_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return parse_csv(f, path.string());
}

struct SynthParams {
  std::size_t days = 1461;
  Date start = Date{std::chrono::year{2020} / 1 / 1};
  double base = 60.0;              // liters/day
  double yearly_amplitude = 25.0;  // liters/day, peaks with temperature
  double weekly_amplitude = 12.0;  // liters/day
  double noise = 6.0;              // stddev of consumption noise
  double temp_mean = 16.0;
  double temp_amplitude = 9.0;
  double temp_noise = 2.5;
  double coupling = 0.8;           // liters/day per deg C of temperature anomaly
  double peak_day = 200.0;         // seasonal maximum, days after `start`
};

/// consumption_d = base + A_y s_d + A_w sin(2 pi d / 7) + coupling (T_d - T_mean) + noise N
/// temperature_d = T_mean + A_T s_d + temp_noise N
/// with s_d = cos(2 pi (d - peak_day) / 365); consumption is floored at 0.
inline RawSeries synthesize(Rng& rng, const SynthParams& p) {
  if (p.days < 60) throw ArgumentError("synthesize: days must be >= 60, got " + std::to_string(p.days));
  RawSeries raw;
  raw.dates.reserve(p.days);
  raw.consumption.reserve(p.days);
  raw.temperature.reserve(p.days);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t d = 0; d < p.days; ++d) {
    const double t = static_cast<double>(d);
    const double season = std::cos(two_pi * (t - p.peak_day) / 365.0);
    const double weekly = std::sin(two_pi * static_cast<double>(d % 7) / 7.0);
    double temp = p.temp_mean + p.temp_amplitude * season;
    if (p.temp_noise > 0.0) temp += rng.normal(0.0, p.temp_noise);
    double cons = p.base + p.yearly_amplitude * season + p.weekly_amplitude * weekly +
                  p.coupling * (temp - p.temp_mean);
    if (p.noise > 0.0) cons += rng.normal(0.0, p.noise);
    raw.dates.push_back(p.start + std::chrono::days{static_cast<int>(d)});
    raw.consumption.push_back(std::max(cons, 0.0));
    raw.temperature.push_back(temp);
  }
  return raw;
}

class MinMaxScaler {
 public:
  MinMaxScaler() = default;
  MinMaxScaler(std::vector<double> mins, std::vector<double> maxs) : min_(std::move(mins)), max_(std::move(maxs)) {
    if (min_.size() != max_.size()) throw ShapeError("scaler min/max length mismatch");
    for (std::size_t f = 0; f < min_.size(); ++f) {
      if (!(max_[f] > min_[f])) throw DomainError("degenerate feature " + std::to_string(f) + ": max <= min");
    }
  }

  // Fit on the first `rows` rows of `data` (all rows when rows == 0).
  static MinMaxScaler fit(const Matrix& data, std::size_t rows = 0) {
    if (rows == 0) rows = data.rows();
    if (rows > data.rows() || rows == 0) throw ArgumentError("scaler fit: invalid row count");
    std::vector<double> lo(data.cols()), hi(data.cols());
    for (std::size_t f = 0; f < data.cols(); ++f) {
      lo[f] = hi[f] = data(0, f);
      for (std::size_t r = 1; r < rows; ++r) {
        lo[f] = std::min(lo[f], data(r, f));
        hi[f] = std::max(hi[f], data(r, f));
      }
      if (!(hi[f] > lo[f])) {
        throw DomainError("degenerate feature " + std::to_string(f) + ": constant value " + format_double(lo[f]));
      }
    }
    return MinMaxScaler(std::move(lo), std::move(hi));
  }

  std::size_t num_features() const { return min_.size(); }
  const std::vector<double>& mins() const { return min_; }
  const std::vector<double>& maxs() const { return max_; }
  double range(std::size_t f) const { return max_[f] - min_[f]; }

  double scale(double x, std::size_t f) const { return (x - min_[f]) / (max_[f] - min_[f]); }
  double unscale(double s, std::size_t f) const { return s * (max_[f] - min_[f]) + min_[f]; }

  Matrix transform(Matrix data) const {
    check_cols(data);
    for (std::size_t r = 0; r < data.rows(); ++r)
      for (std::size_t f = 0; f < data.cols(); ++f) data(r, f) = scale(data(r, f), f);
    return data;
  }

  Matrix inverse(Matrix data) const {
    check_cols(data);
    for (std::size_t r = 0; r < data.rows(); ++r)
      for (std::size_t f = 0; f < data.cols(); ++f) data(r, f) = unscale(data(r, f), f);
    return data;
  }

  std::vector<double> inverse(std::vector<double> values, std::size_t feature) const {
    for (double& v : values) v = unscale(v, feature);
    return values;
  }

  bool operator==(const MinMaxScaler&) const = default;

 private:
  void check_cols(const Matrix& m) const {
    if (m.cols() != min_.size()) {
      throw ShapeError("scaler has " + std::to_string(min_.size()) + " features, data has " + std::to_string(m.cols()));
    }
  }

  std::vector<double> min_;
  std::vector<double> max_;
};

inline std::pair<MinMaxScaler, Matrix> fit_scale(const Matrix& data, std::size_t fit_rows = 0) {
  auto scaler = MinMaxScaler::fit(data, fit_rows);
  return {scaler, scaler.transform(data)};
}

inline Matrix inverse_scale(const MinMaxScaler& scaler, Matrix values) { return scaler.inverse(std::move(values)); }

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t total() const { return train + validation + test; }
};

// train and validation are floor(n * fraction); the remainder goes to test.
inline SplitSizes split_sizes(std::size_t num_samples, const SplitFractions& fr) {
  if (fr.train < 0 || fr.validation < 0 || fr.test < 0 ||
      std::abs(fr.train + fr.validation + fr.test - 1.0) > 1e-9) {
    throw ArgumentError("split fractions must be >= 0 and sum to 1");
  }
  SplitSizes s;
  s.train = static_cast<std::size_t>(std::floor(static_cast<double>(num_samples) * fr.train));
  s.validation = static_cast<std::size_t>(std::floor(static_cast<double>(num_samples) * fr.validation));
  s.test = num_samples - s.train - s.validation;
  return s;
}

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Supervised windows. Sample i covers rows [i, i + L) as input and the
/// consumption at row i + L as target. Splits are contiguous and
/// chronological: train, validation, test.
struct WindowedDataset {
  std::size_t sequence_length = 0;
  std::size_t num_features = 0;
  std::vector<Matrix> X;  // each sequence_length x num_features
  std::vector<double> Y;
  SplitSizes sizes;

  std::size_t num_samples() const { return X.size(); }
  IndexRange train() const { return {0, sizes.train}; }
  IndexRange validation() const { return {sizes.train, sizes.train + sizes.validation}; }
  IndexRange test() const { return {sizes.train + sizes.validation, num_samples()}; }
};

inline std::size_t minimum_rows(std::size_t sequence_length, const SplitFractions& fr) {
  // Smallest row count that yields at least one sample in every split.
  for (std::size_t n = 3;; ++n) {
    auto s = split_sizes(n, fr);
    if (s.train > 0 && s.validation > 0 && s.test > 0) return n + sequence_length;
    if (n > 1'000'000) throw ArgumentError("split fractions leave a split permanently empty");
  }
}

/// Windows a scaled series. Input entries are saturated to [0, 1] so that
/// validation/test rows outside the training range stay in the valid data
/// box; targets are left unsaturated.
inline WindowedDataset window(const Matrix& scaled, std::size_t sequence_length, const SplitFractions& fr = {}) {
  if (sequence_length < 1) throw ArgumentError("sequence_length must be >= 1");
  const std::size_t need = minimum_rows(sequence_length, fr);
  if (scaled.rows() < need) {
    throw ArgumentError("insufficient data: " + std::to_string(scaled.rows()) + " rows, need at least " +
                        std::to_string(need) + " for sequence_length " + std::to_string(sequence_length));
  }
  WindowedDataset ds;
  ds.sequence_length = sequence_length;
  ds.num_features = scaled.cols();
  const std::size_t n = scaled.rows() - sequence_length;
  ds.sizes = split_sizes(n, fr);
  ds.X.reserve(n);
  ds.Y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Matrix w(sequence_length, scaled.cols());
    for (std::size_t t = 0; t < sequence_length; ++t)
      for (std::size_t f = 0; f < scaled.cols(); ++f) w(t, f) = std::clamp(scaled(i + t, f), 0.0, 1.0);
    ds.X.push_back(std::move(w));
    ds.Y.push_back(scaled(i + sequence_length, kConsumption));
  }
  return ds;
}

struct PreparedData {
  MinMaxScaler scaler;
  WindowedDataset dataset;
  std::vector<Date> target_dates;  // date of each sample's target row
};

/// Split, fit the scaler on the rows the training samples touch (inputs and
/// targets), then scale and window the whole series.
inline PreparedData prepare(const RawSeries& raw, std::size_t sequence_length, const SplitFractions& fr = {}) {
  raw.validate();
  const Matrix features = raw.features();
  const std::size_t need = minimum_rows(sequence_length, fr);
  if (raw.size() < need) {
    throw ArgumentError("insufficient data: " + std::to_string(raw.size()) + " rows, need at least " +
                        std::to_string(need));
  }
  const auto sizes = split_sizes(raw.size() - sequence_length, fr);
  auto [scaler, scaled] = fit_scale(features, sizes.train + sequence_length);
  PreparedData out{scaler, window(scaled, sequence_length, fr), {}};
  out.target_dates.assign(raw.dates.begin() + static_cast<std::ptrdiff_t>(sequence_length), raw.dates.end());
  return out;
}

}  // namespace wfa
