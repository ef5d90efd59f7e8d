#pragma once

// Command implementations behind tools/wfa_cli.cpp. Each writes its
// artifacts into cfg.out and a run_<command>.json record of the config.

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "wfa/config.hpp"
#include "wfa/harness_io.hpp"

namespace wfa {

namespace fs = std::filesystem;

inline fs::path model_path(const ExperimentConfig& cfg) { return fs::path(cfg.out) / "model.bin"; }

inline RawSeries load_dataset(const ExperimentConfig& cfg) {
  if (!cfg.data_csv.empty()) {
    if (!fs::exists(cfg.data_csv)) throw DataError("data file not found: " + cfg.data_csv);
    return load_csv(cfg.data_csv);
  }
  Rng rng(cfg.seed);
  return synthesize(rng, cfg.synth);
}

// Run records name files, never absolute paths, so two output directories
// produced from the same inputs aggregate to the same report.
inline void write_run_record(const ExperimentConfig& cfg, const std::string& command,
                             const std::vector<std::string>& outputs) {
  auto j = to_json(cfg);
  j.erase("out");
  if (!cfg.data_csv.empty()) j["data"]["csv"] = fs::path(cfg.data_csv).filename().string();
  write_json_file(fs::path(cfg.out) / ("run_" + command + ".json"),
                  {{"command", command}, {"config", j}, {"outputs", outputs}});
}

inline void ensure_out(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out + ": " + ec.message());
}

inline fs::path cmd_generate_data(const ExperimentConfig& cfg, std::ostream& log, fs::path emit = {}) {
  Rng rng(cfg.seed);
  const RawSeries raw = synthesize(rng, cfg.synth);
  if (emit.empty()) {
    ensure_out(cfg);
    emit = fs::path(cfg.out) / "data.csv";
  }
  write_csv(emit, raw);
  double lo = raw.consumption[0], hi = lo, sum = 0.0, tsum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    lo = std::min(lo, raw.consumption[i]);
    hi = std::max(hi, raw.consumption[i]);
    sum += raw.consumption[i];
    tsum += raw.temperature[i];
  }
  const double n = static_cast<double>(raw.size());
  log << "wrote " << emit.string() << ": " << raw.size() << " days " << format_date(raw.dates.front()) << ".."
      << format_date(raw.dates.back()) << "\n"
      << "consumption_l mean " << sum / n << " min " << lo << " max " << hi << "\n"
      << "temp_c mean " << tsum / n << "\n";
  return emit;
}

inline ForecastModel cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out(cfg);
  const auto data = prepare(load_dataset(cfg), cfg.sequence_length, cfg.splits);
  const auto res = train(data.dataset, cfg.train);
  ForecastModel model{cfg.tag, cfg.sequence_length, cfg.splits, data.scaler, res.params};
  save_model(model, model_path(cfg));
  write_text(fs::path(cfg.out) / "history.csv", history_csv(res.history));
  write_run_record(cfg, "train", {"model.bin", "history.csv"});
  log << "trained " << to_string(cfg.tag) << " (hidden " << cfg.train.hidden << ", " << cfg.train.epochs
      << " epochs): train mse " << res.history.front().train_mse << " -> " << res.history.back().train_mse
      << ", val mse " << res.history.back().val_mse << "\n";
  return model;
}

namespace detail {
struct Loaded {
  ForecastModel model;
  PreparedData data;
};

inline Loaded load_for_eval(const ExperimentConfig& cfg) {
  const auto path = model_path(cfg);
  if (!fs::exists(path)) throw IoError("model file not found: " + path.string() + " (run train first)");
  Loaded l{load_model(path), {}};
  l.data = prepare_for_model(load_dataset(cfg), l.model);
  return l;
}
}  // namespace detail

inline EvalReport cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log) {
  ensure_out(cfg);
  const auto l = detail::load_for_eval(cfg);
  const SplitEvaluator ev(l.model, l.data, l.data.dataset.test());
  const auto rep = ev.evaluate_clean();
  auto j = to_json(rep);
  j["model"] = to_string(l.model.tag);
  j["split"] = "test";
  write_json_file(fs::path(cfg.out) / "eval.json", j);
  write_run_record(cfg, "evaluate", {"eval.json"});
  log << "test split (" << rep.n << " days): MAE " << rep.mae << " RMSE " << rep.rmse << " MAPE " << rep.mape << "%\n";
  return rep;
}

inline std::vector<SweepRow> cmd_attack_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out(cfg);
  const auto l = detail::load_for_eval(cfg);
  const SplitEvaluator ev(l.model, l.data, l.data.dataset.test());
  const auto rows = attack_sweep(ev, cfg.attack_kind, cfg.epsilons, cfg.pgd);
  const std::string kind(to_string(cfg.attack_kind));
  write_text(fs::path(cfg.out) / ("sweep_" + kind + ".csv"), sweep_csv(rows));
  write_run_record(cfg, "attack_" + kind, {"sweep_" + kind + ".csv"});
  for (const auto& r : rows) {
    log << kind << " eps " << r.epsilon << ": MAE " << r.report.mae << " RMSE " << r.report.rmse << " MAPE "
        << r.report.mape << "%\n";
  }
  return rows;
}

inline std::vector<TraceRow> cmd_attack_campaign(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  ensure_out(cfg);
  const auto l = detail::load_for_eval(cfg);
  const SplitEvaluator ev(l.model, l.data, l.data.dataset.test());
  ModelEnvironment env(ev, cfg.pgd.bounds, cfg.campaign.multi_mode, cfg.pgd.feature_mask);
  AutomatonState state(cfg.actions, cfg.seed);
  OverlayRecorder overlay(ev);
  const bool multi = cfg.attack_kind == AttackKind::Rla;
  auto campaign = cfg.campaign;
  campaign.multi = multi;
  const auto trace = run_campaign<ModelEnvironment>(env, state, campaign,
                                                    [&](std::size_t t, const auto& fed) { overlay(t, fed); });
  const std::string kind(to_string(cfg.attack_kind));
  const std::vector<std::string> files{"trace_" + kind + ".csv", "epsilon_" + kind + ".csv", "overlay_" + kind + ".csv"};
  write_text(fs::path(cfg.out) / files[0], trace_csv(trace));
  write_text(fs::path(cfg.out) / files[1], epsilon_series_csv(trace));
  write_text(fs::path(cfg.out) / files[2], overlay_csv(overlay.rows(), l.data.target_dates));
  write_run_record(cfg, "attack_" + kind, files);
  double sum = 0.0;
  for (const auto& r : trace) sum += r.mape;
  log << kind << " campaign: " << trace.size() << " iterations, mean MAPE " << sum / static_cast<double>(trace.size())
      << "%, final MAPE " << trace.back().mape << "%\n";
  return trace;
}

inline StealthReport cmd_stealth(const ExperimentConfig& cfg, const fs::path& overlay_file, std::ostream& log) {
  ensure_out(cfg);
  const auto rows = read_overlay(overlay_file);
  const auto rep = stealth_score(rows, cfg.stealth_window, cfg.stealth_z);
  auto j = to_json(rep);
  j["input"] = overlay_file.filename().string();
  const std::string name = "stealth_" + overlay_file.stem().string() + ".json";
  write_json_file(fs::path(cfg.out) / name, j);
  log << "stealth " << overlay_file.filename().string() << ": flagged " << rep.flagged_fraction << " of "
      << rep.scores.size() << " points (z* " << rep.z_threshold << ", window " << rep.window << ")\n";
  return rep;
}

inline nlohmann::json cmd_report(const fs::path& dir, const fs::path& output, std::ostream& log) {
  auto report = build_report(dir);
  write_json_file(output, report);
  log << "report: " << report["runs"].size() << " runs, " << report["sweeps"].size() << " sweeps, "
      << report["campaigns"].size() << " campaigns, " << report["stealth"].size() << " stealth scores -> "
      << output.string() << "\n";
  return report;
}

}  // namespace wfa
