#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "wfa/attacks.hpp"
#include "wfa/dataseries.hpp"
#include "wfa/errors.hpp"
#include "wfa/lstm.hpp"

namespace wfa {

struct AdversarialTraining {
  AttackKind kind = AttackKind::Fgsm;  // Fgsm or Pgd
  double epsilon = 0.005;
};

struct TrainConfig {
  std::size_t hidden = 12;
  double learning_rate = 0.3;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
  double clip = 1.0;  // max global L2 norm of the gradient
  std::optional<AdversarialTraining> adversarial;

  void validate() const {
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(clip > 0.0)) throw ConfigError("gradient clip threshold must be > 0");
    if (adversarial) {
      if (adversarial->kind != AttackKind::Fgsm && adversarial->kind != AttackKind::Pgd) {
        throw ConfigError("adversarial training supports fgsm or pgd");
      }
      if (!(adversarial->epsilon >= 0.0)) throw ConfigError("adversarial epsilon must be >= 0");
    }
  }
};

// Registered defaults for the two model labels. LSTM+ differs only in width.
inline TrainConfig default_train_config(ModelTag tag) {
  TrainConfig c;
  if (tag == ModelTag::LstmPlus) c.hidden = 24;
  return c;
}

struct EpochLoss {
  std::size_t epoch = 0;  // 0 = before the first update
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  LstmParams params;
  std::vector<EpochLoss> history;
};

inline double dataset_mse(const LstmParams& p, const WindowedDataset& ds, IndexRange r) {
  std::span<const Matrix> X(ds.X.data() + r.begin, r.size());
  std::span<const double> Y(ds.Y.data() + r.begin, r.size());
  return mse_loss(predict_batch(p, X), Y);
}

namespace detail {

inline double gradient_norm(const LstmGradients& g) {
  double s = 0.0;
  g.for_each_block([&](std::span<const double> b) {
    for (double v : b) s += v * v;
  });
  return std::sqrt(s);
}

inline void sgd_step(LstmParams& p, const LstmGradients& g, double lr, double clip) {
  const double norm = gradient_norm(g);
  const double scale = norm > clip ? clip / norm : 1.0;
  std::vector<std::span<const double>> gblocks;
  g.for_each_block([&](std::span<const double> b) { gblocks.push_back(b); });
  std::size_t k = 0;
  p.for_each_block([&](std::span<double> b) {
    auto gb = gblocks[k++];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * scale * gb[i];
  });
}

}  // namespace detail

/// Mini-batch gradient descent on the training split. Each epoch shuffles
/// the training samples with the config seed; history[0] holds the losses
/// of the initial parameters and history[e] those after epoch e.
inline TrainResult train(LstmParams params, const WindowedDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.train().size() == 0 || ds.validation().size() == 0) {
    throw ArgumentError("train: dataset needs non-empty train and validation splits");
  }
  if (params.features != ds.num_features) throw ShapeError("train: model/dataset feature count mismatch");
  params.validate();

  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(ds.train().size());
  std::iota(order.begin(), order.end(), ds.train().begin);

  TrainResult result;
  auto record = [&](std::size_t epoch) {
    EpochLoss e{epoch, dataset_mse(params, ds, ds.train()), dataset_mse(params, ds, ds.validation())};
    if (!std::isfinite(e.train_mse) || !std::isfinite(e.val_mse)) throw TrainingDivergedError(epoch, "loss is not finite");
    result.history.push_back(e);
  };
  record(0);

  std::vector<Matrix> bx;
  std::vector<double> by;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      bx.clear();
      by.clear();
      for (std::size_t k = start; k < end; ++k) {
        bx.push_back(ds.X[order[k]]);
        by.push_back(ds.Y[order[k]]);
      }
      if (cfg.adversarial && cfg.adversarial->epsilon > 0.0) {
        const std::size_t n = bx.size();
        AttackConfig ac;
        ac.epsilon = cfg.adversarial->epsilon;
        for (std::size_t k = 0; k < n; ++k) {
          bx.push_back(cfg.adversarial->kind == AttackKind::Pgd ? pgd(params, bx[k], by[k], ac)
                                                                 : fgsm(params, bx[k], by[k], ac.epsilon));
          by.push_back(by[k]);
        }
      }
      const auto g = param_gradients(params, bx, by);
      if (!std::isfinite(g.loss)) throw TrainingDivergedError(epoch, "batch loss is not finite");
      detail::sgd_step(params, g.grads, cfg.learning_rate, cfg.clip);
    }
    record(epoch);
  }
  result.params = std::move(params);
  return result;
}

inline TrainResult train(const WindowedDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  return train(LstmParams::init(cfg.hidden, ds.num_features, rng), ds, cfg);
}

}  // namespace wfa
