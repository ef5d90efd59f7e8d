#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "wfa/pipeline.hpp"

using namespace wfa;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("wfa_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.out = out.string();
  c.seed = 5;
  c.synth.days = 400;
  c.sequence_length = 14;
  c.train.hidden = 4;
  c.hidden_explicit = true;
  c.train.epochs = 3;
  c.campaign.iterations = 60;
  c.resolve();
  return c;
}

nlohmann::json without_timestamp(nlohmann::json j) {
  j.erase("generated_at");
  return j;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.seed = 9;
  c.tag = ModelTag::LstmPlus;
  c.data_csv = "in.csv";
  c.epsilons = {0.0, 0.02};
  c.pgd.iterations = 25;
  c.pgd.alpha = 0.001;
  c.pgd.feature_mask = {true, false};
  c.campaign.rla.k_domain = {1, 2};
  c.campaign.multi_mode = MultiEpsilonMode::Summed;
  c.train.adversarial = AdversarialTraining{AttackKind::Pgd, 0.003};
  c.synth.start = *parse_date("2019-06-01");
  c.resolve();
  const auto j = to_json(c);
  const auto back = config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.train.hidden, 24u);
}

TEST(Config, MissingKeysKeepTheBaseAndUnknownKeysFail) {
  ExperimentConfig base;
  base.seed = 77;
  base.train.epochs = 5;
  const auto c = config_from_json(nlohmann::json::parse(R"({"train": {"learning_rate": 0.1}})"), base);
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.train.epochs, 5u);
  EXPECT_EQ(c.train.learning_rate, 0.1);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"trian": {}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"train": {"epochs": "many"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"train": {"epochs": -3}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"schema_version": 2})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"attack": {"kind": "deepfool"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"model": {"tag": "GRU"}})")), ConfigError);
}

TEST(Config, ValidateRejectsBadValues) {
  ExperimentConfig c;
  c.epsilons = {0.0, -0.1};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.actions.epsilons = {0.2, 0.1};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.campaign.rla.k_domain = {5};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.splits = {0.5, 0.5, 0.5};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, LstmPlusWidensUnlessHiddenIsExplicit) {
  ExperimentConfig c;
  c.tag = ModelTag::LstmPlus;
  c.resolve();
  EXPECT_EQ(c.train.hidden, 24u);
  c.train.hidden = 7;
  c.hidden_explicit = true;
  c.resolve();
  EXPECT_EQ(c.train.hidden, 7u);
}

TEST(Files, HistoryRoundTrip) {
  const auto d = fresh_dir("hist");
  const std::vector<EpochLoss> h{{0, 0.5, 0.6}, {1, 0.1 + 0.2, 1.0 / 3.0}};
  write_text(d / "history.csv", history_csv(h));
  const auto back = read_history(d / "history.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].train_mse, 0.1 + 0.2);
  EXPECT_EQ(back[1].val_mse, 1.0 / 3.0);
}

TEST(Files, SweepRoundTripAndOrdering) {
  const auto d = fresh_dir("sweep");
  std::vector<SweepRow> rows{{ModelTag::LstmPlus, 0.0, {1, 2, 3, 4}}, {ModelTag::Lstm, 0.01, {5, 6, 7.125, 8}},
                             {ModelTag::Lstm, 0.0, {1.0 / 7, 2, 3, 4}}};
  write_text(d / "sweep_fgsm.csv", sweep_csv(rows));
  const auto back = read_sweep(d / "sweep_fgsm.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].tag, ModelTag::Lstm);
  EXPECT_EQ(back[0].epsilon, 0.0);
  EXPECT_EQ(back[0].report.mae, 1.0 / 7);
  EXPECT_EQ(back[1].epsilon, 0.01);
  EXPECT_EQ(back[2].tag, ModelTag::LstmPlus);
}

TEST(Files, TraceRoundTrip) {
  const auto d = fresh_dir("trace");
  std::vector<TraceRow> trace{{0, {0.001}, {}, 25.0, 0.0, Verdict::NoOp, {0.5, 0.5}},
                              {1, {0.001, 0.005}, {0.0005, 0.001}, 40.0, 15.0, Verdict::Reward, {0.55, 0.45}}};
  write_text(d / "trace_rla.csv", trace_csv(trace));
  const auto back = read_trace(d / "trace_rla.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[0].epsilons.empty());
  EXPECT_EQ(back[1].epsilons, (std::vector<double>{0.0005, 0.001}));
  EXPECT_EQ(back[1].judgement, "reward");
  EXPECT_EQ(back[1].probs, (std::vector<double>{0.55, 0.45}));
  EXPECT_NE(epsilon_series_csv(trace).find("1,0.001;0.005,5e-04;0.001"), std::string::npos);
}

TEST(Files, OverlayRoundTripAndMalformedCsv) {
  const auto d = fresh_dir("overlay");
  std::vector<OverlayRow> rows{{0, 3, 50.5, 49.0, 52.25}, {1, 4, 51.0, 50.0, 53.0}};
  const std::vector<Date> dates(10, *parse_date("2022-01-01"));
  write_text(d / "overlay_la.csv", overlay_csv(rows, dates));
  const auto back = read_overlay(d / "overlay_la.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].attacked, 52.25);
  EXPECT_EQ(back[1].sample, 4u);
  write_text(d / "bad.csv", "iteration,sample\n1\n");
  EXPECT_THROW(read_csv_table(d / "bad.csv"), FormatError);
  EXPECT_THROW(read_overlay(d / "missing.csv"), IoError);
}

TEST(Stealth, InfiniteThresholdFlagsNothing) {
  Rng rng(1);
  std::vector<double> clean(200), attacked(200);
  for (std::size_t i = 0; i < 200; ++i) {
    clean[i] = rng.normal(50, 5);
    attacked[i] = clean[i] + rng.normal(0, 30);
  }
  EXPECT_EQ(stealth_score(clean, attacked, 30, std::numeric_limits<double>::infinity()).flagged_fraction, 0.0);
}

TEST(Stealth, SelfComparisonMatchesCleanBaseRate) {
  Rng rng(2);
  std::vector<double> clean(500);
  for (auto& v : clean) v = rng.normal(50, 5);
  const auto self = stealth_score(clean, clean, 30, 3.0);
  // base rate computed directly: each clean point against its own trailing window
  std::size_t flagged = 0;
  for (std::size_t t = 30; t < clean.size(); ++t) {
    double m = 0;
    for (std::size_t k = t - 30; k < t; ++k) m += clean[k];
    m /= 30;
    double v = 0;
    for (std::size_t k = t - 30; k < t; ++k) v += (clean[k] - m) * (clean[k] - m);
    flagged += std::abs(clean[t] - m) / std::sqrt(v / 30) > 3.0;
  }
  EXPECT_EQ(self.flagged_fraction, static_cast<double>(flagged) / 470.0);
  EXPECT_EQ(self.scores.size(), 470u);
  EXPECT_GE(self.flagged_fraction, 0.0);
  EXPECT_LE(self.flagged_fraction, 1.0);
}

TEST(Stealth, WindowMustFitTheSeries) {
  std::vector<double> a(10, 1.0);
  EXPECT_THROW(stealth_score(a, a, 10, 3.0), ArgumentError);
  EXPECT_THROW(stealth_score(a, a, 1, 3.0), ArgumentError);
  EXPECT_THROW(stealth_score(a, std::vector<double>(9, 1.0), 3, 3.0), ShapeError);
  // zero-variance history: exact match scores 0, any deviation scores inf
  std::vector<double> b = a;
  b[9] = 2.0;
  const auto r = stealth_score(a, b, 3, 3.0);
  EXPECT_EQ(r.scores.front(), 0.0);
  EXPECT_TRUE(std::isinf(r.scores.back()));
}

TEST(Report, EmptyDirectoryIsAnError) {
  const auto d = fresh_dir("empty");
  EXPECT_THROW(build_report(d), DataError);
  EXPECT_THROW(build_report(d / "nope"), IoError);
}

TEST(Report, AggregatesEverySweepFileAndValidates) {
  const auto d = fresh_dir("report_n");
  for (const char* k : {"fgsm", "pgd", "extra"}) {
    write_text(d / (std::string("sweep_") + k + ".csv"), sweep_csv({{ModelTag::Lstm, 0.0, {1, 2, 3, 4}}}));
  }
  const auto r = build_report(d);
  EXPECT_EQ(r["sweeps"].size(), 3u);
  EXPECT_EQ(check_report_schema(r), "");
  auto broken = r;
  broken["sweeps"][0].erase("rows");
  EXPECT_NE(check_report_schema(broken), "");
}

TEST(Pipeline, CommandsProduceConsistentArtifacts) {
  const auto d = fresh_dir("pipeline");
  auto cfg = small_config(d);
  std::ostringstream log;

  const auto data = cmd_generate_data(cfg, log);
  const auto first = slurp(data);
  cmd_generate_data(cfg, log);
  EXPECT_EQ(slurp(data), first);
  EXPECT_NO_THROW(load_csv(data));
  cfg.data_csv = data.string();

  cmd_train(cfg, log);
  ASSERT_TRUE(fs::exists(d / "model.bin"));
  const auto model_bytes = slurp(d / "model.bin");
  const auto hist = read_history(d / "history.csv");
  EXPECT_EQ(hist.size(), cfg.train.epochs + 1);
  cmd_train(cfg, log);
  EXPECT_EQ(slurp(d / "model.bin"), model_bytes);

  const auto clean = cmd_evaluate(cfg, log);
  for (auto kind : {AttackKind::Fgsm, AttackKind::Pgd}) {
    cfg.attack_kind = kind;
    const auto rows = cmd_attack_sweep(cfg, log);
    ASSERT_EQ(rows.front().epsilon, 0.0);
    EXPECT_EQ(rows.front().report, clean);
    const auto back = read_sweep(d / ("sweep_" + std::string(to_string(kind)) + ".csv"));
    EXPECT_EQ(back.front().report, clean);
  }

  cfg.attack_kind = AttackKind::Rla;
  const auto trace = cmd_attack_campaign(cfg, log);
  EXPECT_EQ(trace.size(), cfg.campaign.iterations);
  const auto file = read_trace(d / "trace_rla.csv");
  ASSERT_EQ(file.size(), cfg.campaign.iterations);
  std::set<std::vector<double>> distinct;
  for (const auto& row : file) {
    EXPECT_NEAR(std::accumulate(row.probs.begin(), row.probs.end(), 0.0), 1.0, 1e-9);
    distinct.insert(row.epsilons);
  }
  EXPECT_GT(distinct.size(), 1u);
  EXPECT_EQ(read_overlay(d / "overlay_rla.csv").size(), cfg.campaign.iterations);

  cfg.stealth_window = 20;
  const auto st = cmd_stealth(cfg, d / "overlay_rla.csv", log);
  EXPECT_GE(st.flagged_fraction, 0.0);
  EXPECT_LE(st.flagged_fraction, 1.0);

  const auto r1 = cmd_report(d, d / "report.json", log);
  EXPECT_EQ(check_report_schema(r1), "");
  EXPECT_EQ(r1["sweeps"].size(), 2u);
  EXPECT_EQ(r1["campaigns"].size(), 1u);
  EXPECT_EQ(r1["stealth"].size(), 1u);
  const auto r2 = cmd_report(d, d / "report.json", log);
  EXPECT_EQ(without_timestamp(r1), without_timestamp(r2));
}

TEST(Pipeline, MissingModelAndDataAreReported) {
  const auto d = fresh_dir("missing");
  auto cfg = small_config(d);
  std::ostringstream log;
  EXPECT_THROW(cmd_evaluate(cfg, log), IoError);
  cfg.data_csv = (d / "nope.csv").string();
  EXPECT_THROW(cmd_train(cfg, log), DataError);
}

TEST(Pipeline, ZeroEpsilonCampaignActionIsNeutral) {
  // A campaign whose fed payload is clean scores the clean MAPE exactly.
  const auto d = fresh_dir("neutral");
  auto cfg = small_config(d);
  std::ostringstream log;
  cmd_train(cfg, log);
  const auto clean = cmd_evaluate(cfg, log);
  cfg.attack_kind = AttackKind::La;
  cfg.campaign.delay = 5;
  cfg.campaign.iterations = 5;
  const auto trace = cmd_attack_campaign(cfg, log);
  for (const auto& row : trace) EXPECT_EQ(row.mape, clean.mape);
}
