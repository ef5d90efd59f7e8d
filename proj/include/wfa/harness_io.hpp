#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wfa/automata.hpp"
#include "wfa/dataseries.hpp"
#include "wfa/errors.hpp"
#include "wfa/experiment.hpp"
#include "wfa/metrics.hpp"
#include "wfa/train.hpp"

namespace wfa {

inline constexpr std::string_view kToolName = "wfa";
inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

// ---- generic CSV -----------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("CSV is missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size()) {
        throw FormatError(path.string() + ": row " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                          " fields, header has " + std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw FormatError(path.string() + ": empty CSV");
  return t;
}

inline double cell_double(const std::string& s, const std::string& where) {
  auto v = parse_double(s);
  if (!v) throw FormatError(where + ": not a number '" + s + "'");
  return *v;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

inline std::string join_doubles(const std::vector<double>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_double(v[i]);
  }
  return out;
}

// ---- loss history: epoch,train_mse,val_mse ---------------------------------

inline std::string history_csv(const std::vector<EpochLoss>& h) {
  std::string out = "epoch,train_mse,val_mse\n";
  for (const auto& e : h) out += std::to_string(e.epoch) + "," + format_double(e.train_mse) + "," + format_double(e.val_mse) + "\n";
  return out;
}

inline std::vector<EpochLoss> read_history(const std::filesystem::path& path) {
  const auto t = read_csv_table(path);
  const auto ce = t.column("epoch"), ct = t.column("train_mse"), cv = t.column("val_mse");
  std::vector<EpochLoss> out;
  for (const auto& r : t.rows) {
    out.push_back({static_cast<std::size_t>(cell_double(r[ce], path.string())), cell_double(r[ct], path.string()),
                   cell_double(r[cv], path.string())});
  }
  return out;
}

// ---- sweep: model,epsilon,mae,rmse,mape,n -----------------------------------

inline std::string sweep_csv(std::vector<SweepRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::make_pair(static_cast<int>(a.tag), a.epsilon) < std::make_pair(static_cast<int>(b.tag), b.epsilon);
  });
  std::string out = "model,epsilon,mae,rmse,mape,n\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.tag)) + "," + format_double(r.epsilon) + "," + format_double(r.report.mae) + "," +
           format_double(r.report.rmse) + "," + format_double(r.report.mape) + "," + std::to_string(r.report.n) + "\n";
  }
  return out;
}

inline std::vector<SweepRow> read_sweep(const std::filesystem::path& path) {
  const auto t = read_csv_table(path);
  const auto cm = t.column("model"), ce = t.column("epsilon"), ca = t.column("mae"), cr = t.column("rmse"),
             cp = t.column("mape"), cn = t.column("n");
  const std::string w = path.string();
  std::vector<SweepRow> out;
  for (const auto& r : t.rows) {
    SweepRow row;
    row.tag = parse_model_tag(r[cm]);
    row.epsilon = cell_double(r[ce], w);
    row.report = {cell_double(r[ca], w), cell_double(r[cr], w), cell_double(r[cp], w),
                  static_cast<std::size_t>(cell_double(r[cn], w))};
    out.push_back(row);
  }
  return out;
}

// ---- campaign trace: iteration,epsilons,mape,delta_mape,judgement,p0..pN ---

inline std::string trace_csv(const std::vector<TraceRow>& trace) {
  const std::size_t n = trace.empty() ? 0 : trace.front().probs.size();
  std::string out = "iteration,epsilons,mape,delta_mape,judgement";
  for (std::size_t i = 0; i < n; ++i) out += ",p" + std::to_string(i);
  out += '\n';
  for (const auto& r : trace) {
    out += std::to_string(r.iteration) + "," + join_doubles(r.applied, ';') + "," + format_double(r.mape) + "," +
           format_double(r.delta_mape) + "," + std::string(to_string(r.verdict));
    for (double p : r.probs) out += "," + format_double(p);
    out += '\n';
  }
  return out;
}

struct TraceFileRow {
  std::size_t iteration = 0;
  std::vector<double> epsilons;
  double mape = 0.0;
  double delta_mape = 0.0;
  std::string judgement;
  std::vector<double> probs;
};

inline std::vector<TraceFileRow> read_trace(const std::filesystem::path& path) {
  const auto t = read_csv_table(path);
  const std::string w = path.string();
  const auto ci = t.column("iteration"), ce = t.column("epsilons"), cm = t.column("mape"), cd = t.column("delta_mape"),
             cj = t.column("judgement");
  std::vector<std::size_t> pcols;
  for (std::size_t i = 0;; ++i) {
    auto it = std::find(t.header.begin(), t.header.end(), "p" + std::to_string(i));
    if (it == t.header.end()) break;
    pcols.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  std::vector<TraceFileRow> out;
  for (const auto& r : t.rows) {
    TraceFileRow row;
    row.iteration = static_cast<std::size_t>(cell_double(r[ci], w));
    if (!r[ce].empty())
      for (const auto& e : split(r[ce], ';')) row.epsilons.push_back(cell_double(e, w));
    row.mape = cell_double(r[cm], w);
    row.delta_mape = cell_double(r[cd], w);
    row.judgement = r[cj];
    for (auto c : pcols) row.probs.push_back(cell_double(r[c], w));
    out.push_back(std::move(row));
  }
  return out;
}

// ---- plot data ---------------------------------------------------------------

// iteration,chosen,applied (epsilon-vs-iteration series)
inline std::string epsilon_series_csv(const std::vector<TraceRow>& trace) {
  std::string out = "iteration,chosen,applied\n";
  for (const auto& r : trace) {
    out += std::to_string(r.iteration) + "," + join_doubles(r.chosen, ';') + "," + join_doubles(r.applied, ';') + "\n";
  }
  return out;
}

// iteration,sample,date,actual,clean,attacked (forecast overlay, liters/day)
inline std::string overlay_csv(const std::vector<OverlayRow>& rows, const std::vector<Date>& target_dates) {
  std::string out = "iteration,sample,date,actual,clean,attacked\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + std::to_string(r.sample) + "," +
           (r.sample < target_dates.size() ? format_date(target_dates[r.sample]) : std::string()) + "," +
           format_double(r.actual) + "," + format_double(r.clean) + "," + format_double(r.attacked) + "\n";
  }
  return out;
}

inline std::vector<OverlayRow> read_overlay(const std::filesystem::path& path) {
  const auto t = read_csv_table(path);
  const std::string w = path.string();
  const auto ci = t.column("iteration"), cs = t.column("sample"), ca = t.column("actual"), cc = t.column("clean"),
             ct = t.column("attacked");
  std::vector<OverlayRow> out;
  for (const auto& r : t.rows) {
    out.push_back({static_cast<std::size_t>(cell_double(r[ci], w)), static_cast<std::size_t>(cell_double(r[cs], w)),
                   cell_double(r[ca], w), cell_double(r[cc], w), cell_double(r[ct], w)});
  }
  return out;
}

// ---- JSON artifacts ----------------------------------------------------------

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"mae", r.mae}, {"rmse", r.rmse}, {"mape", r.mape}, {"n", r.n}};
}

inline nlohmann::json to_json(const StealthReport& r, bool with_scores = true) {
  nlohmann::json j = {{"z_threshold", std::isinf(r.z_threshold) ? nlohmann::json("inf") : nlohmann::json(r.z_threshold)},
                      {"window", r.window},
                      {"flagged_fraction", r.flagged_fraction},
                      {"num_windows", r.scores.size()}};
  if (with_scores) {
    nlohmann::json s = nlohmann::json::array();
    for (double v : r.scores) s.push_back(std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v));
    j["scores"] = s;
  }
  return j;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- consolidated report -------------------------------------------------------

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {
inline bool starts_with(const std::string& s, std::string_view p) { return s.rfind(p, 0) == 0; }
inline bool ends_with(const std::string& s, std::string_view p) {
  return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}
// "sweep_fgsm.csv" -> "fgsm"
inline std::string middle(const std::string& name, std::string_view prefix, std::string_view suffix) {
  return name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
}
}  // namespace detail

/// Aggregates every recognised artifact in `dir` (sorted by file name):
///   run_*.json      -> runs
///   history*.csv    -> training
///   eval*.json      -> evaluations
///   sweep_*.csv     -> sweeps
///   trace_*.csv     -> campaigns
///   stealth*.json   -> stealth
inline nlohmann::json build_report(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  using nlohmann::json;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());

  json report = {{"report_schema_version", kReportSchemaVersion},
                 {"tool", {{"name", kToolName}, {"version", kToolVersion}}},
                 {"generated_at", utc_timestamp()},
                 {"runs", json::array()},
                 {"training", json::array()},
                 {"evaluations", json::array()},
                 {"sweeps", json::array()},
                 {"campaigns", json::array()},
                 {"stealth", json::array()}};
  std::size_t artifacts = 0;
  for (const auto& name : names) {
    const fs::path p = dir / name;
    using detail::ends_with;
    using detail::starts_with;
    if (starts_with(name, "run_") && ends_with(name, ".json")) {
      json j = read_json_file(p);
      j["file"] = name;
      report["runs"].push_back(j);
    } else if (starts_with(name, "history") && ends_with(name, ".csv")) {
      const auto h = read_history(p);
      if (h.empty()) throw FormatError(name + ": empty history");
      report["training"].push_back({{"file", name},
                                    {"epochs", h.back().epoch},
                                    {"initial_train_mse", h.front().train_mse},
                                    {"final_train_mse", h.back().train_mse},
                                    {"final_val_mse", h.back().val_mse}});
    } else if (starts_with(name, "eval") && ends_with(name, ".json")) {
      json j = read_json_file(p);
      j["file"] = name;
      report["evaluations"].push_back(j);
    } else if (starts_with(name, "sweep_") && ends_with(name, ".csv")) {
      json rows = json::array();
      for (const auto& r : read_sweep(p)) {
        json row = to_json(r.report);
        row["model"] = to_string(r.tag);
        row["epsilon"] = r.epsilon;
        rows.push_back(row);
      }
      report["sweeps"].push_back({{"file", name}, {"attack", detail::middle(name, "sweep_", ".csv")}, {"rows", rows}});
    } else if (starts_with(name, "trace_") && ends_with(name, ".csv")) {
      const auto tr = read_trace(p);
      if (tr.empty()) throw FormatError(name + ": empty trace");
      double sum = 0.0, mx = 0.0;
      std::size_t rewards = 0, penalties = 0, noops = 0;
      for (const auto& r : tr) {
        sum += r.mape;
        mx = std::max(mx, r.mape);
        if (r.judgement == "reward") ++rewards;
        else if (r.judgement == "penalize") ++penalties;
        else ++noops;
      }
      report["campaigns"].push_back({{"file", name},
                                     {"attack", detail::middle(name, "trace_", ".csv")},
                                     {"iterations", tr.size()},
                                     {"mean_mape", sum / static_cast<double>(tr.size())},
                                     {"max_mape", mx},
                                     {"final_probs", tr.back().probs},
                                     {"verdicts", {{"reward", rewards}, {"penalize", penalties}, {"noop", noops}}}});
    } else if (starts_with(name, "stealth") && ends_with(name, ".json")) {
      json j = read_json_file(p);
      j.erase("scores");
      j["file"] = name;
      report["stealth"].push_back(j);
    } else {
      continue;
    }
    ++artifacts;
  }
  if (artifacts == 0) throw DataError("no run artifacts found in " + dir.string());
  return report;
}

/// Structural check of a report document; returns an empty string when valid,
/// otherwise the first problem found.
inline std::string check_report_schema(const nlohmann::json& r) {
  using nlohmann::json;
  if (!r.is_object()) return "report is not an object";
  if (!r.contains("report_schema_version") || r["report_schema_version"] != kReportSchemaVersion) return "bad schema version";
  if (!r.contains("tool") || !r["tool"].is_object() || !r["tool"].contains("name") || !r["tool"].contains("version")) return "bad tool";
  if (!r.contains("generated_at") || !r["generated_at"].is_string()) return "missing generated_at";
  for (const char* key : {"runs", "training", "evaluations", "sweeps", "campaigns", "stealth"}) {
    if (!r.contains(key) || !r[key].is_array()) return std::string("missing array ") + key;
    for (const auto& e : r[key]) {
      if (!e.is_object() || !e.contains("file") || !e["file"].is_string()) return std::string(key) + ": entry without file";
    }
  }
  for (const auto& s : r["sweeps"]) {
    if (!s.contains("attack") || !s.contains("rows") || !s["rows"].is_array()) return "sweep entry malformed";
    for (const auto& row : s["rows"])
      for (const char* k : {"model", "epsilon", "mae", "rmse", "mape", "n"})
        if (!row.contains(k)) return std::string("sweep row missing ") + k;
  }
  for (const auto& c : r["campaigns"]) {
    for (const char* k : {"attack", "iterations", "mean_mape", "max_mape", "final_probs", "verdicts"})
      if (!c.contains(k)) return std::string("campaign missing ") + k;
  }
  for (const auto& s : r["stealth"]) {
    for (const char* k : {"z_threshold", "window", "flagged_fraction"})
      if (!s.contains(k)) return std::string("stealth missing ") + k;
  }
  return {};
}

}  // namespace wfa
