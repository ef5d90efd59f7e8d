#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wfa/attacks.hpp"
#include "wfa/errors.hpp"
#include "wfa/numerics.hpp"

namespace wfa {

/// Candidate perturbation sizes, strictly increasing and positive.
struct ActionSet {
  std::vector<double> epsilons{0.0001, 0.0005, 0.001, 0.0025, 0.005};

  std::size_t size() const { return epsilons.size(); }

  void validate() const {
    if (epsilons.empty()) throw ArgumentError("action set is empty");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
      if (!(epsilons[i] > 0.0)) throw ArgumentError("action epsilons must be > 0");
      if (i > 0 && !(epsilons[i] > epsilons[i - 1])) throw ArgumentError("action epsilons must be strictly increasing");
    }
  }
};

struct Action {
  std::size_t index = 0;
  double epsilon = 0.0;
  bool operator==(const Action&) const = default;
};

/// Probability vector over an ActionSet plus the generator that samples it.
/// Starts uniform.
class AutomatonState {
 public:
  AutomatonState(ActionSet actions, std::uint64_t seed)
      : actions_(std::move(actions)), probs_(actions_.size(), 0.0), rng_(seed) {
    actions_.validate();
    for (std::size_t i = 0; i < probs_.size(); ++i) probs_[i] = 1.0 / static_cast<double>(probs_.size());
  }

  const ActionSet& actions() const { return actions_; }
  const Vector& probs() const { return probs_; }
  Vector& probs() { return probs_; }
  Rng& rng() { return rng_; }

  void set_probs(Vector p) {
    if (p.size() != actions_.size()) throw ShapeError("probability vector length != action count");
    probs_ = std::move(p);
  }

 private:
  ActionSet actions_;
  Vector probs_;
  Rng rng_;
};

inline Action select_action(AutomatonState& s) {
  const std::size_t i = s.rng().choice_weighted(s.probs().values());
  return {i, s.actions().epsilons[i]};
}

namespace detail {
inline void check_index(const AutomatonState& s, std::size_t index) {
  if (index >= s.probs().size()) {
    throw ArgumentError("action index " + std::to_string(index) + " out of range (" +
                        std::to_string(s.probs().size()) + " actions)");
  }
}

inline void check_factor(double v, const char* what) {
  if (!(v >= 0.0 && v < 1.0)) throw ArgumentError(std::string(what) + " factor must lie in [0, 1)");
}
}  // namespace detail

// Divide every probability by the total.
inline void normalize(Vector& probs) {
  double total = 0.0;
  for (double v : probs.values()) total += v;
  if (!(total > 0.0)) throw NumericError("probability vector has no mass");
  for (double& v : probs.values()) v /= total;
}

/// P_a <- P_a + r (1 - P_a); the remaining actions are then rescaled to
/// share 1 - P_a in their existing proportions (which multiplies each of
/// them by 1 - r).
inline void reward(AutomatonState& s, std::size_t index, double r) {
  detail::check_index(s, index);
  detail::check_factor(r, "reward");
  Vector& p = s.probs();
  const double chosen = p[index] + r * (1.0 - p[index]);
  double others = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j)
    if (j != index) others += p[j];
  p[index] = chosen;
  if (others > 0.0) {
    const double scale = (1.0 - chosen) / others;
    for (std::size_t j = 0; j < p.size(); ++j)
      if (j != index) p[j] *= scale;
  } else {
    p[index] = 1.0;
  }
}

/// P_a <- P_a (1 - p), then the whole vector is divided by its sum.
inline void penalize(AutomatonState& s, std::size_t index, double p) {
  detail::check_index(s, index);
  detail::check_factor(p, "penalty");
  Vector& probs = s.probs();
  probs[index] *= (1.0 - p);
  normalize(probs);
}

/// Reward/penalty settings. MAPE values are percent; jump_cap is in
/// percentage points.
struct RewardPolicy {
  double r = 0.1;
  double p = 0.05;
  double band_lo = 30.0;
  double band_hi = 50.0;
  double hard_cap = 100.0;
  double jump_cap = 5.0;

  void validate() const {
    detail::check_factor(r, "reward");
    detail::check_factor(p, "penalty");
    if (!(band_lo < band_hi && band_hi < hard_cap)) throw ArgumentError("reward band must satisfy lo < hi < cap");
    if (!(jump_cap >= 0.0)) throw ArgumentError("jump cap must be >= 0");
  }
};

// 3p above the hard cap, 1.5p for a jump above jump_cap, p otherwise.
inline double adaptive_penalty(const RewardPolicy& policy, double mape, double delta_mape) {
  if (mape > policy.hard_cap) return 3.0 * policy.p;
  if (delta_mape > policy.jump_cap) return 1.5 * policy.p;
  return policy.p;
}

enum class Verdict { Reward, Penalize, NoOp };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Reward: return "reward";
    case Verdict::Penalize: return "penalize";
    case Verdict::NoOp: return "noop";
  }
  return "noop";
}

struct Judgement {
  Verdict verdict = Verdict::NoOp;
  double penalty = 0.0;  // effective penalty factor when verdict == Penalize
  bool operator==(const Judgement&) const = default;
};

/// First matching rule wins:
///   band_lo < mape < band_hi  -> Reward
///   mape > hard_cap           -> Penalize(3p)
///   delta_mape > jump_cap     -> Penalize(1.5p)
///   otherwise                 -> NoOp
inline Judgement judge(const RewardPolicy& policy, double mape, double delta_mape) {
  if (mape > policy.band_lo && mape < policy.band_hi) return {Verdict::Reward, 0.0};
  if (mape > policy.hard_cap || delta_mape > policy.jump_cap) {
    return {Verdict::Penalize, adaptive_penalty(policy, mape, delta_mape)};
  }
  return {Verdict::NoOp, 0.0};
}

inline void apply_judgement(AutomatonState& s, std::size_t index, const RewardPolicy& policy, const Judgement& j) {
  if (j.verdict == Verdict::Reward) reward(s, index, policy.r);
  else if (j.verdict == Verdict::Penalize) penalize(s, index, j.penalty);
}

struct RlaConfig {
  std::vector<std::size_t> k_domain{1, 2, 3};

  void validate(std::size_t num_actions) const {
    if (k_domain.empty()) throw ArgumentError("k-domain is empty");
    for (auto k : k_domain) {
      if (k < 1 || k > 3) throw ArgumentError("k-domain values must lie in {1, 2, 3}");
      if (k > num_actions) {
        throw ArgumentError("k = " + std::to_string(k) + " exceeds the action count " + std::to_string(num_actions));
      }
    }
  }
};

/// Draws k uniformly from the k-domain (no draw when it has a single value),
/// then k distinct actions without replacement, each draw weighted by the
/// remaining probabilities. When the remaining mass is zero the next pick is
/// uniform over the unpicked actions. Result is sorted by epsilon.
inline std::vector<Action> select_multi(const RlaConfig& cfg, AutomatonState& s) {
  cfg.validate(s.actions().size());
  const std::size_t k = cfg.k_domain.size() == 1 ? cfg.k_domain[0] : cfg.k_domain[s.rng().index(cfg.k_domain.size())];
  std::vector<double> w(s.probs().values().begin(), s.probs().values().end());
  std::vector<bool> taken(w.size(), false);
  std::vector<Action> out;
  for (std::size_t n = 0; n < k; ++n) {
    double mass = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!taken[i]) mass += w[i];
    std::size_t pick = 0;
    if (mass > 0.0) {
      pick = s.rng().choice_weighted(w);
    } else {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < w.size(); ++i)
        if (!taken[i]) free.push_back(i);
      pick = free[s.rng().index(free.size())];
    }
    taken[pick] = true;
    w[pick] = 0.0;
    out.push_back({pick, s.actions().epsilons[pick]});
  }
  std::sort(out.begin(), out.end(), [](const Action& a, const Action& b) { return a.epsilon < b.epsilon; });
  return out;
}

enum class MultiEpsilonMode {
  Sequential,  // one FGSM step per epsilon on the running input, ascending
  Summed,      // a single step of size sum(epsilons) along the clean-input gradient sign
};

template <InputDifferentiable M>
Matrix apply_multi(const M& model, const Matrix& X, double y, std::vector<double> epsilons, const Bounds& bounds = {},
                   MultiEpsilonMode mode = MultiEpsilonMode::Sequential, const std::vector<bool>& feature_mask = {}) {
  if (epsilons.empty()) throw ArgumentError("apply_multi: empty epsilon set");
  std::sort(epsilons.begin(), epsilons.end());
  if (mode == MultiEpsilonMode::Summed) {
    double total = 0.0;
    for (double e : epsilons) total += e;
    return fgsm(model, X, y, total, bounds, feature_mask);
  }
  Matrix cur = X;
  for (double e : epsilons) cur = fgsm(model, cur, y, e, bounds, feature_mask);
  return cur;
}

/// Emits what was stored `delay` pushes ago; while fewer than `delay` items
/// precede the current one, emits the caller's clean value instead.
template <typename T>
class DelayBuffer {
 public:
  explicit DelayBuffer(std::size_t delay) : delay_(delay) {}

  std::size_t delay() const { return delay_; }

  T push_pop(T item, const T& clean) {
    queue_.push_back(std::move(item));
    if (queue_.size() > delay_) {
      T out = std::move(queue_.front());
      queue_.pop_front();
      return out;
    }
    return clean;
  }

 private:
  std::size_t delay_;
  std::deque<T> queue_;
};

/// Closed-loop environment the automata attack. perturb() builds the
/// attacked payload for a set of epsilons, clean() the unattacked one, and
/// mape() scores whichever payload is fed to the forecaster.
template <typename E>
concept AttackEnvironment = requires(E& e, const std::vector<double>& eps, const typename E::Payload& payload) {
  typename E::Payload;
  { e.perturb(eps) } -> std::same_as<typename E::Payload>;
  { e.clean() } -> std::same_as<typename E::Payload>;
  { e.mape(payload) } -> std::convertible_to<double>;
};

struct CampaignConfig {
  RewardPolicy policy;
  std::size_t iterations = 300;
  std::size_t delay = 3;
  bool multi = false;  // false: LA (one epsilon), true: RLA (select_multi)
  RlaConfig rla;
  MultiEpsilonMode multi_mode = MultiEpsilonMode::Sequential;
};

struct TraceRow {
  std::size_t iteration = 0;
  std::vector<double> chosen;   // epsilons selected this iteration
  std::vector<double> applied;  // epsilons behind the payload fed this iteration (empty: clean)
  double mape = 0.0;
  double delta_mape = 0.0;
  Verdict verdict = Verdict::NoOp;
  std::vector<double> probs;  // after this iteration's update
};

/// One loop per iteration: select, perturb, pass through the delay buffer,
/// score the emitted payload, judge, and credit the actions that produced
/// the emitted payload. Warm-up iterations feed the clean payload and
/// update nothing.
template <AttackEnvironment E>
std::vector<TraceRow> run_campaign(
    E& env, AutomatonState& state, const CampaignConfig& cfg,
    const std::function<void(std::size_t, const typename E::Payload&)>& on_fed = {}) {
  using Payload = typename E::Payload;
  struct Pending {
    std::vector<Action> actions;
    Payload payload;
  };
  cfg.policy.validate();
  if (cfg.iterations < 1) throw ArgumentError("campaign needs iterations >= 1");
  if (cfg.multi) cfg.rla.validate(state.actions().size());

  DelayBuffer<Pending> buffer(cfg.delay);
  const Pending clean{{}, env.clean()};
  std::vector<TraceRow> trace;
  trace.reserve(cfg.iterations);
  std::optional<double> prev_mape;

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    std::vector<Action> chosen = cfg.multi ? select_multi(cfg.rla, state) : std::vector<Action>{select_action(state)};
    std::vector<double> eps;
    for (const auto& a : chosen) eps.push_back(a.epsilon);

    Pending fed = buffer.push_pop(Pending{chosen, env.perturb(eps)}, clean);
    if (on_fed) on_fed(t, fed.payload);

    TraceRow row;
    row.iteration = t;
    row.chosen = eps;
    for (const auto& a : fed.actions) row.applied.push_back(a.epsilon);
    row.mape = env.mape(fed.payload);
    row.delta_mape = prev_mape ? row.mape - *prev_mape : 0.0;
    prev_mape = row.mape;

    if (!fed.actions.empty()) {
      const Judgement j = judge(cfg.policy, row.mape, row.delta_mape);
      row.verdict = j.verdict;
      for (const auto& a : fed.actions) apply_judgement(state, a.index, cfg.policy, j);
    }
    row.probs.assign(state.probs().values().begin(), state.probs().values().end());
    trace.push_back(std::move(row));
  }
  return trace;
}

template <AttackEnvironment E>
std::vector<TraceRow> la_attack_loop(E& env, AutomatonState& state, CampaignConfig cfg,
                                     const std::function<void(std::size_t, const typename E::Payload&)>& on_fed = {}) {
  cfg.multi = false;
  return run_campaign(env, state, cfg, on_fed);
}

template <AttackEnvironment E>
std::vector<TraceRow> rla_attack_loop(E& env, AutomatonState& state, CampaignConfig cfg,
                                      const std::function<void(std::size_t, const typename E::Payload&)>& on_fed = {}) {
  cfg.multi = true;
  return run_campaign(env, state, cfg, on_fed);
}

}  // namespace wfa
