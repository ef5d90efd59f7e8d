#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wfa/attacks.hpp"
#include "wfa/automata.hpp"
#include "wfa/dataseries.hpp"
#include "wfa/metrics.hpp"
#include "wfa/model_io.hpp"

namespace wfa {

/// Re-derives the windowed dataset a model was trained on, using the
/// model's own scaler, sequence length and split fractions.
inline PreparedData prepare_for_model(const RawSeries& raw, const ForecastModel& m) {
  raw.validate();
  if (m.scaler.num_features() != kNumFeatures) throw ShapeError("model scaler does not match the two-feature layout");
  PreparedData out{m.scaler, window(m.scaler.transform(raw.features()), m.sequence_length, m.splits), {}};
  out.target_dates.assign(raw.dates.begin() + static_cast<std::ptrdiff_t>(m.sequence_length), raw.dates.end());
  return out;
}

/// Scores forecasts for one split in physical units.
class SplitEvaluator {
 public:
  SplitEvaluator(const ForecastModel& model, const PreparedData& data, IndexRange range)
      : model_(&model), data_(&data), range_(range) {
    if (range.size() == 0) throw ArgumentError("evaluation split is empty");
    actual_.reserve(range.size());
    for (std::size_t i = range.begin; i < range.end; ++i) {
      actual_.push_back(data.scaler.unscale(data.dataset.Y[i], kConsumption));
    }
  }

  std::span<const Matrix> windows() const { return {data_->dataset.X.data() + range_.begin, range_.size()}; }
  std::span<const double> targets() const { return {data_->dataset.Y.data() + range_.begin, range_.size()}; }
  const std::vector<double>& actual() const { return actual_; }
  const ForecastModel& model() const { return *model_; }
  IndexRange range() const { return range_; }

  std::vector<double> forecast(std::span<const Matrix> windows) const {
    auto pred = predict_batch(model_->params, windows);
    for (double& v : pred) v = data_->scaler.unscale(v, kConsumption);
    return pred;
  }

  EvalReport evaluate(std::span<const Matrix> windows) const {
    if (windows.size() != range_.size()) throw ShapeError("evaluate: window count != split size");
    return evaluate_metrics(actual_, forecast(windows));
  }

  EvalReport evaluate_clean() const { return evaluate(windows()); }

 private:
  const ForecastModel* model_;
  const PreparedData* data_;
  IndexRange range_;
  std::vector<double> actual_;
};

struct SweepRow {
  ModelTag tag = ModelTag::Lstm;
  double epsilon = 0.0;
  EvalReport report;
};

inline const std::vector<double>& default_epsilon_grid() {
  static const std::vector<double> grid{0.0, 0.001, 0.005, 0.008, 0.01};
  return grid;
}

/// One row per epsilon: perturb every window of the split with `kind`,
/// then score. `base` supplies bounds, PGD iterations/alpha and the mask;
/// when base.alpha <= 0 each row uses alpha = epsilon / 4.
inline std::vector<SweepRow> attack_sweep(const SplitEvaluator& ev, AttackKind kind, std::vector<double> grid,
                                          const AttackConfig& base = {}) {
  if (kind != AttackKind::Fgsm && kind != AttackKind::Pgd) throw ArgumentError("sweep kind must be fgsm or pgd");
  std::sort(grid.begin(), grid.end());
  std::vector<SweepRow> rows;
  for (double eps : grid) {
    if (!(eps >= 0.0)) throw ArgumentError("epsilon grid values must be >= 0");
    AttackConfig cfg = base;
    cfg.epsilon = eps;
    const auto adv = perturb_all(ev.model(), ev.windows(), ev.targets(), kind, cfg);
    rows.push_back({ev.model().tag, eps, ev.evaluate(adv)});
  }
  return rows;
}

/// Campaign environment backed by a trained forecaster and one data split.
/// Payload = the perturbed windows of the whole split. Perturbations are
/// memoised per epsilon set (they are deterministic).
class ModelEnvironment {
 public:
  using Payload = std::vector<Matrix>;

  ModelEnvironment(const SplitEvaluator& ev, Bounds bounds = {}, MultiEpsilonMode mode = MultiEpsilonMode::Sequential,
                   std::vector<bool> mask = {})
      : ev_(&ev), bounds_(bounds), mode_(mode), mask_(std::move(mask)) {}

  Payload clean() const { return Payload(ev_->windows().begin(), ev_->windows().end()); }

  Payload perturb(const std::vector<double>& eps) {
    auto it = cache_.find(eps);
    if (it != cache_.end()) return it->second;
    Payload out;
    out.reserve(ev_->windows().size());
    for (std::size_t n = 0; n < ev_->windows().size(); ++n) {
      out.push_back(apply_multi(ev_->model(), ev_->windows()[n], ev_->targets()[n], eps, bounds_, mode_, mask_));
    }
    cache_.emplace(eps, out);
    return out;
  }

  double mape(const Payload& p) const { return ev_->evaluate(p).mape; }

  const SplitEvaluator& evaluator() const { return *ev_; }

 private:
  const SplitEvaluator* ev_;
  Bounds bounds_;
  MultiEpsilonMode mode_;
  std::vector<bool> mask_;
  std::map<std::vector<double>, Payload> cache_;
};

/// Point-per-iteration forecast stream: iteration t forecasts split sample
/// t mod n from whatever payload was fed at t.
struct OverlayRow {
  std::size_t iteration = 0;
  std::size_t sample = 0;  // dataset sample index
  double actual = 0.0;
  double clean = 0.0;
  double attacked = 0.0;
};

class OverlayRecorder {
 public:
  explicit OverlayRecorder(const SplitEvaluator& ev) : ev_(&ev), clean_(ev.forecast(ev.windows())) {}

  void operator()(std::size_t t, const std::vector<Matrix>& fed) {
    const std::size_t k = t % fed.size();
    const double attacked = ev_->forecast(std::span<const Matrix>(&fed[k], 1))[0];
    rows_.push_back({t, ev_->range().begin + k, ev_->actual()[k], clean_[k], attacked});
  }

  const std::vector<OverlayRow>& rows() const { return rows_; }

 private:
  const SplitEvaluator* ev_;
  std::vector<double> clean_;
  std::vector<OverlayRow> rows_;
};

// Same stream shape for a fixed perturbation of every window.
inline std::vector<OverlayRow> constant_overlay(const SplitEvaluator& ev, std::span<const Matrix> attacked_windows,
                                                std::size_t iterations) {
  const auto clean = ev.forecast(ev.windows());
  const auto attacked = ev.forecast(attacked_windows);
  std::vector<OverlayRow> rows;
  for (std::size_t t = 0; t < iterations; ++t) {
    const std::size_t k = t % clean.size();
    rows.push_back({t, ev.range().begin + k, ev.actual()[k], clean[k], attacked[k]});
  }
  return rows;
}

struct StealthReport {
  double z_threshold = 3.0;
  std::size_t window = 30;
  double flagged_fraction = 0.0;
  std::vector<double> scores;  // |z| of each scored point, one per sliding window
};

/// Rolling z-score detector. For every t >= window, the attacked value at t
/// is standardised with the mean and population standard deviation of the
/// clean values in [t - window, t); the point is flagged when |z| > z*.
/// A zero-variance history gives |z| = 0 for an exact match and +inf
/// otherwise.
inline StealthReport stealth_score(std::span<const double> clean, std::span<const double> attacked,
                                   std::size_t window, double z_threshold) {
  if (clean.size() != attacked.size()) throw ShapeError("stealth: clean/attacked length mismatch");
  if (window < 2 || window >= clean.size()) {
    throw ArgumentError("stealth: window must be in [2, series length), got " + std::to_string(window) + " for " +
                        std::to_string(clean.size()) + " points");
  }
  if (std::isnan(z_threshold) || z_threshold < 0.0) throw ArgumentError("stealth: z* must be >= 0");
  StealthReport rep;
  rep.z_threshold = z_threshold;
  rep.window = window;
  std::size_t flagged = 0;
  for (std::size_t t = window; t < clean.size(); ++t) {
    double mean = 0.0;
    for (std::size_t k = t - window; k < t; ++k) mean += clean[k];
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t k = t - window; k < t; ++k) var += (clean[k] - mean) * (clean[k] - mean);
    const double sd = std::sqrt(var / static_cast<double>(window));
    const double dev = std::abs(attacked[t] - mean);
    const double z = sd > 0.0 ? dev / sd : (dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    rep.scores.push_back(z);
    if (z > z_threshold) ++flagged;
  }
  rep.flagged_fraction = static_cast<double>(flagged) / static_cast<double>(rep.scores.size());
  return rep;
}

inline StealthReport stealth_score(const std::vector<OverlayRow>& rows, std::size_t window, double z_threshold) {
  std::vector<double> clean, attacked;
  for (const auto& r : rows) {
    clean.push_back(r.clean);
    attacked.push_back(r.attacked);
  }
  return stealth_score(clean, attacked, window, z_threshold);
}

}  // namespace wfa
