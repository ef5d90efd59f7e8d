#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wfa/dataseries.hpp"
#include "wfa/errors.hpp"
#include "wfa/lstm.hpp"

namespace wfa {

enum class ModelTag : std::uint32_t { Lstm = 0, LstmPlus = 1 };

inline std::string_view to_string(ModelTag t) { return t == ModelTag::Lstm ? "LSTM" : "LSTM+"; }

inline ModelTag parse_model_tag(std::string_view s) {
  if (s == "LSTM") return ModelTag::Lstm;
  if (s == "LSTM+") return ModelTag::LstmPlus;
  throw ConfigError("unknown model tag '" + std::string(s) + "' (expected LSTM or LSTM+)");
}

/// A trained forecaster plus everything needed to reproduce its inputs.
struct ForecastModel {
  ModelTag tag = ModelTag::Lstm;
  std::size_t sequence_length = 0;
  SplitFractions splits;
  MinMaxScaler scaler;
  LstmParams params;

  bool operator==(const ForecastModel& o) const {
    return tag == o.tag && sequence_length == o.sequence_length && splits.train == o.splits.train &&
           splits.validation == o.splits.validation && splits.test == o.splits.test && scaler == o.scaler &&
           params == o.params;
  }
};

/// Model file layout, version 1. All integers are little-endian u32, all
/// reals little-endian IEEE-754 binary64.
///
///   offset  field
///   0       magic "WFALSTM\0" (8 bytes)
///   8       u32 format version (= 1)
///   12      u32 model tag (0 = LSTM, 1 = LSTM+)
///   16      u32 hidden
///   20      u32 features
///   24      u32 sequence_length
///   28      f64 x3 split fractions (train, validation, test)
///   52      f64 x features scaler minima, then f64 x features scaler maxima
///   ...     f64 payload: W_f, W_i, W_C, W_o (row-major, hidden x (hidden+features)),
///           b_f, b_i, b_C, b_o (hidden each), W_dense (hidden), b_dense (1)
///
/// Nothing may follow the payload.
inline constexpr char kModelMagic[8] = {'W', 'F', 'A', 'L', 'S', 'T', 'M', '\0'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> buf) : buf_(std::move(buf)) {}

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  double f64() {
    need(8, "f64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string_view bytes(std::size_t n) {
    need(n, "header");
    std::string_view s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n) {
      throw FormatError("model file truncated while reading " + std::string(what) + " at byte " + std::to_string(pos_));
    }
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize_model(const ForecastModel& m) {
  m.params.validate();
  if (m.scaler.num_features() != m.params.features) throw ShapeError("scaler/model feature count mismatch");
  detail::ByteWriter w;
  w.bytes(kModelMagic, sizeof kModelMagic);
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(m.tag));
  w.u32(static_cast<std::uint32_t>(m.params.hidden));
  w.u32(static_cast<std::uint32_t>(m.params.features));
  w.u32(static_cast<std::uint32_t>(m.sequence_length));
  w.f64(m.splits.train);
  w.f64(m.splits.validation);
  w.f64(m.splits.test);
  for (double v : m.scaler.mins()) w.f64(v);
  for (double v : m.scaler.maxs()) w.f64(v);
  m.params.for_each_block([&](std::span<const double> s) {
    for (double v : s) w.f64(v);
  });
  return w.data();
}

struct ExpectedShape {
  std::size_t hidden = 0;
  std::size_t features = 0;
};

inline ForecastModel deserialize_model(std::vector<char> bytes, std::optional<ExpectedShape> expect = std::nullopt) {
  detail::ByteReader r(std::move(bytes));
  if (r.bytes(sizeof kModelMagic) != std::string_view(kModelMagic, sizeof kModelMagic)) {
    throw FormatError("not a model file (bad magic)");
  }
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  ForecastModel m;
  const auto tag = r.u32();
  if (tag > 1) throw FormatError("unknown model tag " + std::to_string(tag));
  m.tag = static_cast<ModelTag>(tag);
  const std::size_t hidden = r.u32();
  const std::size_t features = r.u32();
  m.sequence_length = r.u32();
  if (hidden == 0 || features == 0 || m.sequence_length == 0 || hidden > 4096 || features > 4096) {
    throw FormatError("implausible model dimensions");
  }
  if (expect && (expect->hidden != hidden || expect->features != features)) {
    throw ShapeError("model file is (hidden=" + std::to_string(hidden) + ", features=" + std::to_string(features) +
                     "), expected (hidden=" + std::to_string(expect->hidden) +
                     ", features=" + std::to_string(expect->features) + ")");
  }
  m.splits.train = r.f64();
  m.splits.validation = r.f64();
  m.splits.test = r.f64();
  std::vector<double> mins(features), maxs(features);
  for (auto& v : mins) v = r.f64();
  for (auto& v : maxs) v = r.f64();
  m.params = LstmParams::zeros(hidden, features);
  m.params.for_each_block([&](std::span<double> s) {
    for (double& v : s) v = r.f64();
  });
  if (!r.at_end()) throw FormatError("trailing bytes after model payload");
  try {
    m.scaler = MinMaxScaler(std::move(mins), std::move(maxs));
  } catch (const DomainError& e) {
    throw FormatError(std::string("corrupt scaler: ") + e.what());
  }
  m.params.validate();
  return m;
}

inline void save_model(const ForecastModel& m, const std::filesystem::path& path) {
  const auto bytes = serialize_model(m);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

inline ForecastModel load_model(const std::filesystem::path& path, std::optional<ExpectedShape> expect = std::nullopt) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open model file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(std::move(bytes), expect);
}

}  // namespace wfa
