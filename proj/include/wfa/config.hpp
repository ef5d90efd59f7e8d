#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <algorithm>
#include <initializer_list>
#include <string_view>
#include <string>
#include <vector>

#include "json.hpp"
#include "wfa/attacks.hpp"
#include "wfa/automata.hpp"
#include "wfa/dataseries.hpp"
#include "wfa/errors.hpp"
#include "wfa/experiment.hpp"
#include "wfa/model_io.hpp"
#include "wfa/train.hpp"

namespace wfa {

inline constexpr int kConfigSchemaVersion = 1;

/// One experiment run. Serialised as a JSON document (schema_version 1);
/// see README.md for the layout. Missing keys keep their defaults, unknown
/// keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string out = "out";

  std::string data_csv;  // empty: synthesize
  SynthParams synth;

  ModelTag tag = ModelTag::Lstm;
  std::size_t sequence_length = 30;
  SplitFractions splits;
  TrainConfig train;
  bool hidden_explicit = false;

  AttackKind attack_kind = AttackKind::Fgsm;
  std::vector<double> epsilons = default_epsilon_grid();
  AttackConfig pgd;  // epsilon unused; iterations/alpha/bounds/mask

  ActionSet actions;
  CampaignConfig campaign;

  std::size_t stealth_window = 30;
  double stealth_z = 3.0;

  // LSTM+ widens the network unless hidden was set explicitly.
  void resolve() {
    train.seed = seed;
    if (!hidden_explicit) train.hidden = default_train_config(tag).hidden;
  }

  void validate() const {
    train.validate();
    if (sequence_length < 1) throw ConfigError("sequence_length must be >= 1");
    for (double e : epsilons)
      if (!(e >= 0.0)) throw ConfigError("epsilon grid values must be >= 0");
    try {
      split_sizes(100, splits);
      actions.validate();
      campaign.policy.validate();
      campaign.rla.validate(actions.size());
      AttackConfig probe = pgd;
      probe.epsilon = 1.0;
      probe.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
    if (campaign.iterations < 1) throw ConfigError("campaign iterations must be >= 1");
    if (stealth_window < 2) throw ConfigError("stealth window must be >= 2");
  }
};

namespace detail {

using nlohmann::json;

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, std::initializer_list<std::string_view> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    for (const auto& [k, v] : j_.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        throw ConfigError(path_ + "." + k + ": unknown key");
      }
    }
  }

  const json* get(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  template <typename T>
  bool read(const std::string& key, T& out) {
    const json* v = get(key);
    if (!v) return false;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer() || (std::is_unsigned_v<T> && v->template get<std::int64_t>() < 0)) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError("");
      }
      out = v->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
    return true;
  }

 private:
  const json& j_;
  std::string path_;
};

inline json synth_to_json(const SynthParams& s) {
  return {{"days", s.days},
          {"start", format_date(s.start)},
          {"base", s.base},
          {"yearly_amplitude", s.yearly_amplitude},
          {"weekly_amplitude", s.weekly_amplitude},
          {"noise", s.noise},
          {"temp_mean", s.temp_mean},
          {"temp_amplitude", s.temp_amplitude},
          {"temp_noise", s.temp_noise},
          {"coupling", s.coupling},
          {"peak_day", s.peak_day}};
}

inline void synth_from_json(const json& j, SynthParams& s) {
  ObjectReader r(j, "data.synth",
                 {"days", "start", "base", "yearly_amplitude", "weekly_amplitude", "noise", "temp_mean",
                  "temp_amplitude", "temp_noise", "coupling", "peak_day"});
  r.read("days", s.days);
  std::string start;
  if (r.read("start", start)) {
    auto d = parse_date(start);
    if (!d) throw ConfigError("data.synth.start: not an ISO-8601 date");
    s.start = *d;
  }
  r.read("base", s.base);
  r.read("yearly_amplitude", s.yearly_amplitude);
  r.read("weekly_amplitude", s.weekly_amplitude);
  r.read("noise", s.noise);
  r.read("temp_mean", s.temp_mean);
  r.read("temp_amplitude", s.temp_amplitude);
  r.read("temp_noise", s.temp_noise);
  r.read("coupling", s.coupling);
  r.read("peak_day", s.peak_day);
}

inline std::string_view to_string(MultiEpsilonMode m) { return m == MultiEpsilonMode::Summed ? "summed" : "sequential"; }

inline MultiEpsilonMode parse_multi_mode(std::string_view s) {
  if (s == "sequential") return MultiEpsilonMode::Sequential;
  if (s == "summed") return MultiEpsilonMode::Summed;
  throw ConfigError("unknown multi_mode '" + std::string(s) + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json adv = nullptr;
  if (c.train.adversarial) {
    adv = {{"kind", to_string(c.train.adversarial->kind)}, {"epsilon", c.train.adversarial->epsilon}};
  }
  json mask = json::array();
  for (bool b : c.pgd.feature_mask) mask.push_back(b);
  const auto& pol = c.campaign.policy;
  return {
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"out", c.out},
      {"data", {{"csv", c.data_csv.empty() ? json(nullptr) : json(c.data_csv)}, {"synth", detail::synth_to_json(c.synth)}}},
      {"model",
       {{"tag", to_string(c.tag)},
        {"sequence_length", c.sequence_length},
        {"splits", {c.splits.train, c.splits.validation, c.splits.test}}}},
      {"train",
       {{"hidden", c.train.hidden},
        {"learning_rate", c.train.learning_rate},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"clip", c.train.clip},
        {"adversarial", adv}}},
      {"attack",
       {{"kind", to_string(c.attack_kind)},
        {"epsilons", c.epsilons},
        {"bounds", {c.pgd.bounds.lo, c.pgd.bounds.hi}},
        {"feature_mask", mask},
        {"pgd", {{"iterations", c.pgd.iterations}, {"alpha", c.pgd.alpha > 0 ? json(c.pgd.alpha) : json(nullptr)}}},
        {"automata",
         {{"actions", c.actions.epsilons},
          {"reward", pol.r},
          {"penalty", pol.p},
          {"band", {pol.band_lo, pol.band_hi}},
          {"hard_cap", pol.hard_cap},
          {"jump_cap", pol.jump_cap},
          {"iterations", c.campaign.iterations},
          {"delay", c.campaign.delay},
          {"k_domain", c.campaign.rla.k_domain},
          {"multi_mode", detail::to_string(c.campaign.multi_mode)}}}}},
      {"stealth", {{"window", c.stealth_window}, {"z_threshold", c.stealth_z}}},
  };
}

inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  using detail::ObjectReader;
  ObjectReader root(j, "config", {"schema_version", "seed", "out", "data", "model", "train", "attack", "stealth"});
  int version = kConfigSchemaVersion;
  root.read("schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + std::to_string(version));
  }
  root.read("seed", c.seed);
  root.read("out", c.out);

  if (const auto* d = root.get("data")) {
    ObjectReader r(*d, "data", {"csv", "synth"});
    r.read("csv", c.data_csv);
    if (const auto* s = r.get("synth")) detail::synth_from_json(*s, c.synth);
  }
  if (const auto* m = root.get("model")) {
    ObjectReader r(*m, "model", {"tag", "sequence_length", "splits"});
    std::string tag;
    if (r.read("tag", tag)) c.tag = parse_model_tag(tag);
    r.read("sequence_length", c.sequence_length);
    std::vector<double> sp;
    if (r.read("splits", sp)) {
      if (sp.size() != 3) throw ConfigError("model.splits: expected [train, validation, test]");
      c.splits = {sp[0], sp[1], sp[2]};
    }
  }
  if (const auto* t = root.get("train")) {
    ObjectReader r(*t, "train", {"hidden", "learning_rate", "epochs", "batch_size", "clip", "adversarial"});
    c.hidden_explicit = r.read("hidden", c.train.hidden) || c.hidden_explicit;
    r.read("learning_rate", c.train.learning_rate);
    r.read("epochs", c.train.epochs);
    r.read("batch_size", c.train.batch_size);
    r.read("clip", c.train.clip);
    if (const auto* a = r.get("adversarial")) {
      ObjectReader ar(*a, "train.adversarial", {"kind", "epsilon"});
      AdversarialTraining adv;
      std::string kind;
      if (ar.read("kind", kind)) adv.kind = parse_attack_kind(kind);
      ar.read("epsilon", adv.epsilon);
      c.train.adversarial = adv;
    }
  }
  if (const auto* a = root.get("attack")) {
    ObjectReader r(*a, "attack", {"kind", "epsilons", "bounds", "feature_mask", "pgd", "automata"});
    std::string kind;
    if (r.read("kind", kind)) c.attack_kind = parse_attack_kind(kind);
    r.read("epsilons", c.epsilons);
    std::vector<double> bounds;
    if (r.read("bounds", bounds)) {
      if (bounds.size() != 2) throw ConfigError("attack.bounds: expected [lo, hi]");
      c.pgd.bounds = {bounds[0], bounds[1]};
    }
    r.read("feature_mask", c.pgd.feature_mask);
    if (const auto* p = r.get("pgd")) {
      ObjectReader pr(*p, "attack.pgd", {"iterations", "alpha"});
      pr.read("iterations", c.pgd.iterations);
      pr.read("alpha", c.pgd.alpha);
    }
    if (const auto* au = r.get("automata")) {
      ObjectReader ar(*au, "attack.automata",
                      {"actions", "reward", "penalty", "band", "hard_cap", "jump_cap", "iterations", "delay",
                       "k_domain", "multi_mode"});
      auto& pol = c.campaign.policy;
      ar.read("actions", c.actions.epsilons);
      ar.read("reward", pol.r);
      ar.read("penalty", pol.p);
      std::vector<double> band;
      if (ar.read("band", band)) {
        if (band.size() != 2) throw ConfigError("attack.automata.band: expected [lo, hi]");
        pol.band_lo = band[0];
        pol.band_hi = band[1];
      }
      ar.read("hard_cap", pol.hard_cap);
      ar.read("jump_cap", pol.jump_cap);
      ar.read("iterations", c.campaign.iterations);
      ar.read("delay", c.campaign.delay);
      ar.read("k_domain", c.campaign.rla.k_domain);
      std::string mode;
      if (ar.read("multi_mode", mode)) c.campaign.multi_mode = detail::parse_multi_mode(mode);
    }
  }
  if (const auto* s = root.get("stealth")) {
    ObjectReader r(*s, "stealth", {"window", "z_threshold"});
    r.read("window", c.stealth_window);
    r.read("z_threshold", c.stealth_z);
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

}  // namespace wfa
