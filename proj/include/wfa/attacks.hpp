#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wfa/errors.hpp"
#include "wfa/lstm.hpp"
#include "wfa/model_io.hpp"
#include "wfa/numerics.hpp"

namespace wfa {

/// Anything with a differentiable squared loss against a scalar target:
///   input_gradient(m, X, y) -> dJ/dX (same shape as X)
///   attack_loss(m, X, y)    -> J
template <typename M>
concept InputDifferentiable = requires(const M& m, const Matrix& X, double y) {
  { input_gradient(m, X, y) } -> std::same_as<Matrix>;
  { attack_loss(m, X, y) } -> std::convertible_to<double>;
};

inline Matrix input_gradient(const LstmParams& p, const Matrix& X, double y) { return input_gradients(p, X, y); }
inline double attack_loss(const LstmParams& p, const Matrix& X, double y) {
  const double e = predict(p, X) - y;
  return e * e;
}
inline Matrix input_gradient(const ForecastModel& m, const Matrix& X, double y) { return input_gradients(m.params, X, y); }
inline double attack_loss(const ForecastModel& m, const Matrix& X, double y) { return attack_loss(m.params, X, y); }

enum class AttackKind { None, Fgsm, Pgd, La, Rla };

inline std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::Pgd: return "pgd";
    case AttackKind::La: return "la";
    case AttackKind::Rla: return "rla";
  }
  return "none";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  if (s == "none") return AttackKind::None;
  if (s == "fgsm") return AttackKind::Fgsm;
  if (s == "pgd") return AttackKind::Pgd;
  if (s == "la") return AttackKind::La;
  if (s == "rla") return AttackKind::Rla;
  throw ConfigError("unknown attack kind '" + std::string(s) + "'");
}

// Valid range of scaled inputs.
struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
};

/// Perturbations act on scaled inputs. `feature_mask[f] == false` freezes
/// feature f; an empty mask perturbs every feature.
struct AttackConfig {
  double epsilon = 0.0;
  double alpha = 0.0;  // PGD step; <= 0 means epsilon / 4
  std::size_t iterations = 10;
  Bounds bounds;
  std::vector<bool> feature_mask;

  double step() const { return alpha > 0.0 ? alpha : epsilon / 4.0; }

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ArgumentError("epsilon must be finite and >= 0");
    if (!(bounds.lo < bounds.hi)) throw ArgumentError("attack bounds need lo < hi");
    if (iterations < 1) throw ArgumentError("PGD iterations must be >= 1");
    if (epsilon > 0.0 && step() > epsilon) throw ArgumentError("PGD step alpha must not exceed epsilon");
  }
};

namespace detail {

inline bool masked_in(const std::vector<bool>& mask, std::size_t f) { return mask.empty() || (f < mask.size() && mask[f]); }

inline void check_gradient(const Matrix& X, const Matrix& g) {
  if (g.rows() != X.rows() || g.cols() != X.cols()) {
    throw ShapeError("input gradient is " + g.shape_str() + ", input is " + X.shape_str());
  }
  if (!all_finite(g.values())) throw NumericError("non-finite input gradient");
}

// Clamp into bounds widened to contain the reference value, so entries that
// already sit outside the box are never pushed further or snapped across.
inline double clamp_box(double v, double ref, const Bounds& b) {
  return std::clamp(v, std::min(b.lo, ref), std::max(b.hi, ref));
}

}  // namespace detail

/// X_adv = clamp(X + epsilon * sign(dJ/dX), bounds). epsilon == 0 returns X unchanged.
template <InputDifferentiable M>
Matrix fgsm(const M& model, const Matrix& X, double y, double epsilon, const Bounds& bounds = {},
            const std::vector<bool>& feature_mask = {}) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ArgumentError("fgsm: epsilon must be finite and >= 0");
  if (!(bounds.lo < bounds.hi)) throw ArgumentError("fgsm: bounds need lo < hi");
  if (epsilon == 0.0) return X;
  const Matrix g = input_gradient(model, X, y);
  detail::check_gradient(X, g);
  Matrix out = X;
  for (std::size_t t = 0; t < X.rows(); ++t) {
    for (std::size_t f = 0; f < X.cols(); ++f) {
      const double s = sign(g(t, f));
      if (s == 0.0 || !detail::masked_in(feature_mask, f)) continue;
      out(t, f) = detail::clamp_box(X(t, f) + epsilon * s, X(t, f), bounds);
    }
  }
  return out;
}

/// Projected gradient-sign ascent from X^(0) = X:
///   X^(k+1) = clamp_bounds(clip_[X-eps, X+eps](X^(k) + alpha * sign(dJ/dX^(k))))
template <InputDifferentiable M>
Matrix pgd(const M& model, const Matrix& X, double y, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0) return X;
  const double alpha = cfg.step();
  Matrix cur = X;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Matrix g = input_gradient(model, cur, y);
    detail::check_gradient(cur, g);
    for (std::size_t t = 0; t < X.rows(); ++t) {
      for (std::size_t f = 0; f < X.cols(); ++f) {
        if (!detail::masked_in(cfg.feature_mask, f)) continue;
        const double s = sign(g(t, f));
        if (s == 0.0) continue;
        const double x0 = X(t, f);
        const double stepped = std::clamp(cur(t, f) + alpha * s, x0 - cfg.epsilon, x0 + cfg.epsilon);
        cur(t, f) = detail::clamp_box(stepped, x0, cfg.bounds);
      }
    }
  }
  return cur;
}

/// Perturbs every window in [windows, targets) with the given attack kind
/// (Fgsm, Pgd, or None).
template <InputDifferentiable M>
std::vector<Matrix> perturb_all(const M& model, std::span<const Matrix> windows, std::span<const double> targets,
                                AttackKind kind, const AttackConfig& cfg) {
  if (windows.size() != targets.size()) throw ShapeError("perturb_all: window/target count mismatch");
  std::vector<Matrix> out;
  out.reserve(windows.size());
  for (std::size_t n = 0; n < windows.size(); ++n) {
    switch (kind) {
      case AttackKind::None: out.push_back(windows[n]); break;
      case AttackKind::Fgsm:
        out.push_back(fgsm(model, windows[n], targets[n], cfg.epsilon, cfg.bounds, cfg.feature_mask));
        break;
      case AttackKind::Pgd: out.push_back(pgd(model, windows[n], targets[n], cfg)); break;
      default: throw ArgumentError("perturb_all: kind must be none, fgsm or pgd");
    }
  }
  return out;
}

inline double linf_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("linf_distance: shape mismatch");
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
  return m;
}

}  // namespace wfa
