// wfa: train an LSTM water-consumption forecaster and attack it.
//
// Exit codes: 0 ok, 2 config/usage error, 3 data/IO error, 4 numeric error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "wfa/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

struct Overrides {
  std::optional<std::size_t> days;
  std::optional<std::string> data;
  std::optional<std::string> tag;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::string> kind;
  std::optional<std::vector<double>> epsilons;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> delay;
  std::optional<std::size_t> window;
  std::optional<double> z;
};

// defaults < config file < flags
wfa::ExperimentConfig resolve(const Common& c, const Overrides& o) {
  wfa::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = wfa::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out = *c.out;
  if (o.days) cfg.synth.days = *o.days;
  if (o.data) cfg.data_csv = *o.data;
  if (o.tag) cfg.tag = wfa::parse_model_tag(*o.tag);
  if (o.hidden) {
    cfg.train.hidden = *o.hidden;
    cfg.hidden_explicit = true;
  }
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.lr) cfg.train.learning_rate = *o.lr;
  if (o.kind) cfg.attack_kind = wfa::parse_attack_kind(*o.kind);
  if (o.epsilons) cfg.epsilons = *o.epsilons;
  if (o.iterations) cfg.campaign.iterations = *o.iterations;
  if (o.delay) cfg.campaign.delay = *o.delay;
  if (o.window) cfg.stealth_window = *o.window;
  if (o.z) cfg.stealth_z = *o.z;
  cfg.resolve();
  cfg.validate();
  return cfg;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const wfa::ConfigError*>(&e) || dynamic_cast<const wfa::ArgumentError*>(&e)) return 2;
  if (dynamic_cast<const wfa::NumericError*>(&e)) return 4;
  if (dynamic_cast<const wfa::Error*>(&e)) return 3;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Water-consumption forecaster adversarial attack harness"};
  app.set_version_flag("--version", std::string(wfa::kToolVersion));
  app.require_subcommand(1);

  Common common;
  Overrides ov;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "RNG seed (u64)");
    sub->add_option("--out", common.out, "output directory");
  };

  std::string emit;
  auto* gen = app.add_subcommand("generate-data", "write a synthetic daily consumption CSV");
  add_common(gen);
  gen->add_option("--days", ov.days, "number of days (>= 60)");
  gen->add_option("--emit", emit, "output CSV (default <out>/data.csv)");

  auto* tr = app.add_subcommand("train", "train a forecaster; writes model.bin and history.csv");
  add_common(tr);
  tr->add_option("--data", ov.data, "input CSV (default: synthesize from the seed)");
  tr->add_option("--model-tag", ov.tag, "LSTM or LSTM+");
  tr->add_option("--hidden", ov.hidden, "hidden units");
  tr->add_option("--epochs", ov.epochs, "training epochs");
  tr->add_option("--learning-rate", ov.lr, "SGD learning rate");

  auto* ev = app.add_subcommand("evaluate", "score model.bin on the test split; writes eval.json");
  add_common(ev);
  ev->add_option("--data", ov.data, "input CSV");

  auto* at = app.add_subcommand("attack", "epsilon sweep (fgsm, pgd) or automata campaign (la, rla)");
  add_common(at);
  at->add_option("--data", ov.data, "input CSV");
  at->add_option("--kind", ov.kind, "fgsm | pgd | la | rla")->check(CLI::IsMember({"fgsm", "pgd", "la", "rla"}));
  at->add_option("--epsilons", ov.epsilons, "sweep grid")->delimiter(',');
  at->add_option("--iterations", ov.iterations, "campaign iterations");
  at->add_option("--delay", ov.delay, "delayed-poisoning lag");

  std::string input;
  auto* st = app.add_subcommand("stealth", "rolling z-score detector over an overlay CSV");
  add_common(st);
  st->add_option("--input", input, "overlay_<kind>.csv")->required()->check(CLI::ExistingFile);
  st->add_option("--window", ov.window, "history window");
  st->add_option("--z", ov.z, "z* threshold");

  std::string dir, report_out;
  auto* rp = app.add_subcommand("report", "aggregate an output directory into report.json");
  add_common(rp);
  rp->add_option("--dir", dir, "directory to aggregate (default: --out)");
  rp->add_option("--output", report_out, "report path (default <dir>/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(common, ov);
    auto& log = std::cout;
    if (*gen) {
      wfa::cmd_generate_data(cfg, log, emit);
    } else if (*tr) {
      wfa::cmd_train(cfg, log);
    } else if (*ev) {
      wfa::cmd_evaluate(cfg, log);
    } else if (*at) {
      switch (cfg.attack_kind) {
        case wfa::AttackKind::Fgsm:
        case wfa::AttackKind::Pgd: wfa::cmd_attack_sweep(cfg, log); break;
        case wfa::AttackKind::La:
        case wfa::AttackKind::Rla: wfa::cmd_attack_campaign(cfg, log); break;
        default: throw wfa::ConfigError("attack needs --kind fgsm|pgd|la|rla");
      }
    } else if (*st) {
      wfa::cmd_stealth(cfg, input, log);
    } else if (*rp) {
      const std::filesystem::path d = dir.empty() ? std::filesystem::path(cfg.out) : std::filesystem::path(dir);
      wfa::cmd_report(d, report_out.empty() ? d / "report.json" : std::filesystem::path(report_out), log);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  }
  return 0;
}
