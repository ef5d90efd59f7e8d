#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wfa/errors.hpp"
#include "wfa/numerics.hpp"

namespace wfa {

enum Gate : std::size_t { kForget = 0, kInput = 1, kCandidate = 2, kOutput = 3 };
inline constexpr std::size_t kNumGates = 4;

/// Single-layer LSTM with a scalar dense head.
///
/// Every gate matrix is hidden x (hidden + features) and acts on the
/// concatenation [h_{t-1}, x_t] (hidden state first):
///   f_t  = sigmoid(W_f [h, x] + b_f)
///   i_t  = sigmoid(W_i [h, x] + b_i)
///   C~_t = tanh   (W_C [h, x] + b_C)
///   C_t  = f_t * C_{t-1} + i_t * C~_t
///   o_t  = sigmoid(W_o [h, x] + b_o)
///   h_t  = o_t * tanh(C_t)
///   y    = W_dense h_T + b_dense
struct LstmParams {
  std::size_t hidden = 0;
  std::size_t features = 0;
  std::array<Matrix, kNumGates> W;  // indexed by Gate
  std::array<Vector, kNumGates> b;
  Matrix W_dense;                   // 1 x hidden
  double b_dense = 0.0;

  static LstmParams zeros(std::size_t hidden, std::size_t features) {
    if (hidden == 0 || features == 0) throw ArgumentError("LSTM needs hidden >= 1 and features >= 1");
    LstmParams p;
    p.hidden = hidden;
    p.features = features;
    for (std::size_t g = 0; g < kNumGates; ++g) {
      p.W[g] = Matrix(hidden, hidden + features);
      p.b[g] = Vector(hidden);
    }
    p.W_dense = Matrix(1, hidden);
    return p;
  }

  // Every weight and bias uniform in [-1/sqrt(hidden), 1/sqrt(hidden)).
  static LstmParams init(std::size_t hidden, std::size_t features, Rng& rng) {
    LstmParams p = zeros(hidden, features);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    p.for_each_block([&](std::span<double> block) {
      for (double& v : block) v = rng.uniform(-bound, bound);
    });
    return p;
  }

  std::size_t concat_size() const { return hidden + features; }

  // Visits every parameter block in the canonical order
  // W_f, W_i, W_C, W_o, b_f, b_i, b_C, b_o, W_dense, b_dense.
  template <typename F>
  void for_each_block(F&& f) {
    for (auto& w : W) f(w.values());
    for (auto& v : b) f(v.values());
    f(W_dense.values());
    f(std::span<double>(&b_dense, 1));
  }

  template <typename F>
  void for_each_block(F&& f) const {
    for (const auto& w : W) f(w.values());
    for (const auto& v : b) f(v.values());
    f(W_dense.values());
    f(std::span<const double>(&b_dense, 1));
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for_each_block([&](std::span<const double> s) { n += s.size(); });
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(num_params());
    for_each_block([&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != num_params()) throw ShapeError("unflatten: wrong parameter count");
    std::size_t k = 0;
    for_each_block([&](std::span<double> s) {
      for (double& v : s) v = flat[k++];
    });
  }

  void validate() const {
    for (std::size_t g = 0; g < kNumGates; ++g) {
      if (W[g].rows() != hidden || W[g].cols() != concat_size()) {
        throw ShapeError("gate matrix " + std::to_string(g) + " is " + W[g].shape_str() + ", expected " +
                         std::to_string(hidden) + "x" + std::to_string(concat_size()));
      }
      if (b[g].size() != hidden) throw ShapeError("gate bias " + std::to_string(g) + " has wrong length");
    }
    if (W_dense.rows() != 1 || W_dense.cols() != hidden) throw ShapeError("dense weight is " + W_dense.shape_str());
    bool finite = std::isfinite(b_dense);
    for_each_block([&](std::span<const double> s) { finite = finite && all_finite(s); });
    if (!finite) throw NumericError("parameters contain non-finite values");
  }

  bool operator==(const LstmParams&) const = default;
};

// Gradients share the parameter layout.
using LstmGradients = LstmParams;

/// Activations of one time step, kept for backpropagation.
struct CellStep {
  std::vector<double> x, h_prev, c_prev;
  std::array<std::vector<double>, kNumGates> gate;  // f, i, C~, o (post-activation)
  std::vector<double> c, h;
};

using CellTrace = std::vector<CellStep>;

inline CellStep forward_cell(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev) {
  const std::size_t H = p.hidden;
  if (x.size() != p.features || h_prev.size() != H || c_prev.size() != H) {
    throw ShapeError("forward_cell: expected x[" + std::to_string(p.features) + "], h/c[" + std::to_string(H) +
                     "], got x[" + std::to_string(x.size()) + "], h[" + std::to_string(h_prev.size()) + "], c[" +
                     std::to_string(c_prev.size()) + "]");
  }
  CellStep s;
  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  for (std::size_t g = 0; g < kNumGates; ++g) {
    auto& out = s.gate[g];
    out.resize(H);
    const Matrix& W = p.W[g];
    for (std::size_t j = 0; j < H; ++j) {
      auto row = W.row(j);
      double a = p.b[g][j];
      for (std::size_t k = 0; k < H; ++k) a += row[k] * h_prev[k];
      for (std::size_t k = 0; k < x.size(); ++k) a += row[H + k] * x[k];
      out[j] = g == kCandidate ? std::tanh(a) : sigmoid(a);
    }
  }
  s.c.resize(H);
  s.h.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    s.c[j] = s.gate[kForget][j] * c_prev[j] + s.gate[kInput][j] * s.gate[kCandidate][j];
    s.h[j] = s.gate[kOutput][j] * std::tanh(s.c[j]);
  }
  return s;
}

inline void check_window(const LstmParams& p, const Matrix& window) {
  if (window.cols() != p.features || window.rows() == 0) {
    throw ShapeError("window is " + window.shape_str() + ", expected (T>=1)x" + std::to_string(p.features));
  }
}

inline double dense_head(const LstmParams& p, std::span<const double> h) {
  double y = p.b_dense;
  for (std::size_t j = 0; j < p.hidden; ++j) y += p.W_dense(0, j) * h[j];
  return y;
}

// Runs the window from h_0 = C_0 = 0 and returns every step's activations.
inline CellTrace forward_sequence(const LstmParams& p, const Matrix& window) {
  check_window(p, window);
  CellTrace trace;
  trace.reserve(window.rows());
  std::vector<double> h(p.hidden, 0.0), c(p.hidden, 0.0);
  for (std::size_t t = 0; t < window.rows(); ++t) {
    trace.push_back(forward_cell(p, window.row(t), h, c));
    h = trace.back().h;
    c = trace.back().c;
  }
  return trace;
}

inline double predict(const LstmParams& p, const Matrix& window) {
  check_window(p, window);
  // Same arithmetic as forward_sequence without keeping the trace.
  const std::size_t H = p.hidden;
  std::vector<double> h(H, 0.0), c(H, 0.0), a(kNumGates * H);
  for (std::size_t t = 0; t < window.rows(); ++t) {
    auto x = window.row(t);
    for (std::size_t g = 0; g < kNumGates; ++g) {
      const Matrix& W = p.W[g];
      for (std::size_t j = 0; j < H; ++j) {
        auto row = W.row(j);
        double s = p.b[g][j];
        for (std::size_t k = 0; k < H; ++k) s += row[k] * h[k];
        for (std::size_t k = 0; k < x.size(); ++k) s += row[H + k] * x[k];
        a[g * H + j] = g == kCandidate ? std::tanh(s) : sigmoid(s);
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      c[j] = a[kForget * H + j] * c[j] + a[kInput * H + j] * a[kCandidate * H + j];
      h[j] = a[kOutput * H + j] * std::tanh(c[j]);
    }
  }
  return dense_head(p, h);
}

inline std::vector<double> predict_batch(const LstmParams& p, std::span<const Matrix> windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(predict(p, w));
  return out;
}

inline double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.empty()) throw ArgumentError("mse_loss: empty input");
  if (pred.size() != target.size()) throw ShapeError("mse_loss: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

namespace detail {

/// Backpropagates dLoss/dy through one window's trace. Parameter gradients
/// are accumulated into `grads` (if non-null); input gradients are written
/// to `dX` (if non-null, shape T x features).
inline void backprop(const LstmParams& p, const CellTrace& trace, double dy, LstmGradients* grads, Matrix* dX) {
  const std::size_t H = p.hidden;
  const std::size_t F = p.features;
  std::vector<double> dh(H), dc(H, 0.0), da(kNumGates * H), dz(H + F);
  for (std::size_t j = 0; j < H; ++j) dh[j] = dy * p.W_dense(0, j);
  if (grads) {
    const auto& hT = trace.back().h;
    for (std::size_t j = 0; j < H; ++j) grads->W_dense(0, j) += dy * hT[j];
    grads->b_dense += dy;
  }

  for (std::size_t t = trace.size(); t-- > 0;) {
    const CellStep& s = trace[t];
    const auto& f = s.gate[kForget];
    const auto& i = s.gate[kInput];
    const auto& g = s.gate[kCandidate];
    const auto& o = s.gate[kOutput];
    for (std::size_t j = 0; j < H; ++j) {
      const double tc = std::tanh(s.c[j]);
      const double d_o = dh[j] * tc;
      dc[j] += dh[j] * o[j] * (1.0 - tc * tc);
      da[kForget * H + j] = dc[j] * s.c_prev[j] * f[j] * (1.0 - f[j]);
      da[kInput * H + j] = dc[j] * g[j] * i[j] * (1.0 - i[j]);
      da[kCandidate * H + j] = dc[j] * i[j] * (1.0 - g[j] * g[j]);
      da[kOutput * H + j] = d_o * o[j] * (1.0 - o[j]);
      dc[j] *= f[j];  // now dLoss/dC_{t-1}
    }

    std::fill(dz.begin(), dz.end(), 0.0);
    for (std::size_t gi = 0; gi < kNumGates; ++gi) {
      const Matrix& W = p.W[gi];
      for (std::size_t j = 0; j < H; ++j) {
        const double d = da[gi * H + j];
        if (d == 0.0) continue;
        auto row = W.row(j);
        for (std::size_t k = 0; k < H + F; ++k) dz[k] += row[k] * d;
        if (grads) {
          auto grow = grads->W[gi].row(j);
          for (std::size_t k = 0; k < H; ++k) grow[k] += d * s.h_prev[k];
          for (std::size_t k = 0; k < F; ++k) grow[H + k] += d * s.x[k];
          grads->b[gi][j] += d;
        }
      }
    }
    for (std::size_t j = 0; j < H; ++j) dh[j] = dz[j];
    if (dX) {
      for (std::size_t k = 0; k < F; ++k) (*dX)(t, k) = dz[H + k];
    }
  }
}

}  // namespace detail

struct GradientResult {
  LstmGradients grads;
  double loss = 0.0;
};

/// Exact BPTT gradients of the batch-mean squared error.
inline GradientResult param_gradients(const LstmParams& p, std::span<const Matrix> X, std::span<const double> Y) {
  if (X.empty()) throw ArgumentError("param_gradients: empty batch");
  if (X.size() != Y.size()) throw ShapeError("param_gradients: X/Y length mismatch");
  GradientResult r{LstmParams::zeros(p.hidden, p.features), 0.0};
  const double inv_n = 1.0 / static_cast<double>(X.size());
  for (std::size_t n = 0; n < X.size(); ++n) {
    const CellTrace trace = forward_sequence(p, X[n]);
    const double err = dense_head(p, trace.back().h) - Y[n];
    r.loss += err * err * inv_n;
    detail::backprop(p, trace, 2.0 * err * inv_n, &r.grads, nullptr);
  }
  return r;
}

/// dJ/dX for J = (predict(X) - y)^2, shape T x features.
inline Matrix input_gradients(const LstmParams& p, const Matrix& X, double y) {
  const CellTrace trace = forward_sequence(p, X);
  const double err = dense_head(p, trace.back().h) - y;
  Matrix dX(X.rows(), X.cols());
  detail::backprop(p, trace, 2.0 * err, nullptr, &dX);
  return dX;
}

}  // namespace wfa
