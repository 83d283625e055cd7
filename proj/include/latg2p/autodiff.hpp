// Copyright 2026 The latg2p Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Tape-based reverse-mode differentiation over Tensor<T>.
//
// Every op takes the Tape it records on. A tape that is not recording (see
// Tape::inference()) runs forwards only, which is what evaluation uses.
// Leaf gradients accumulate across backward() calls; gradients of
// intermediate values are reset at the start of every backward().

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "latg2p/error.hpp"
#include "latg2p/tensor.hpp"

namespace latg2p {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;

  /// Lazily allocated gradient buffer of the value's shape.
  Tensor<T>& grad_buffer() {
    if (grad.shape() != value.shape() || grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const noexcept { return grad.shape() == value.shape() && grad.numel() == value.numel(); }
  void zero_grad() {
    if (has_grad()) grad.fill(T{0});
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_var(Tensor<T> value, bool requires_grad = false) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

template <typename T>
Var<T> make_parameter(Tensor<T> value) {
  return make_var(std::move(value), true);
}

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape inference() {
    Tape tape;
    tape.recording_ = false;
    return tape;
  }

  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return backward_fns_.size(); }

  /// Creates an intermediate node; it needs a gradient iff any input does.
  Var<T> output(Tensor<T> value, bool requires_grad) {
    auto node = make_var(std::move(value), recording_ && requires_grad);
    if (node->requires_grad) intermediates_.push_back(node);
    return node;
  }

  void record(std::function<void()> fn) {
    if (recording_) backward_fns_.push_back(std::move(fn));
  }

  /// Seeds d(loss)/d(loss) = 1 and replays the recorded ops in reverse.
  void backward(const Var<T>& loss) {
    if (loss->value.numel() != 1) {
      throw Error(ErrorCode::NotScalar, "backward needs a scalar loss, got shape " + shape_string(loss->value.shape()));
    }
    for (auto& node : intermediates_) {
      node->grad_buffer();
      node->grad.fill(T{0});
    }
    if (!loss->requires_grad) return;
    loss->grad_buffer()[0] += T{1};
    for (auto it = backward_fns_.rbegin(); it != backward_fns_.rend(); ++it) (*it)();
  }

  void clear() {
    backward_fns_.clear();
    intermediates_.clear();
  }

 private:
  bool recording_ = true;
  std::vector<std::function<void()>> backward_fns_;
  std::vector<Var<T>> intermediates_;
};

namespace ops {

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, message);
}

template <typename T>
void accumulate(Node<T>& node, std::span<const T> delta) {
  auto& g = node.grad_buffer();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

}  // namespace detail

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require(a->value.shape() == b->value.shape(),
                  "add: " + shape_string(a->value.shape()) + " vs " + shape_string(b->value.shape()));
  Tensor<T> out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  auto y = tape.output(std::move(out), a->requires_grad || b->requires_grad);
  if (y->requires_grad) {
    tape.record([a, b, y] {
      if (a->requires_grad) detail::accumulate<T>(*a, y->grad.span());
      if (b->requires_grad) detail::accumulate<T>(*b, y->grad.span());
    });
  }
  return y;
}

template <typename T>
Var<T> sum(Tape<T>& tape, const Var<T>& x) {
  double acc = 0.0;
  for (T v : x->value.values()) acc += v;
  auto y = tape.output(Tensor<T>::scalar(static_cast<T>(acc)), x->requires_grad);
  if (y->requires_grad) {
    tape.record([x, y] {
      auto& g = x->grad_buffer();
      const T dy = y->grad[0];
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += dy;
    });
  }
  return y;
}

/// [M,K] x [K,N] -> [M,N]
template <typename T>
Var<T> matmul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require(a->value.rank() == 2 && b->value.rank() == 2, "matmul expects rank-2 operands");
  const std::size_t M = a->value.dim(0), K = a->value.dim(1), N = b->value.dim(1);
  detail::require(b->value.dim(0) == K, "matmul inner dimensions differ: " + shape_string(a->value.shape()) + " x " +
                                            shape_string(b->value.shape()));
  Tensor<T> out({M, N});
  kernels::gemm_nn(M, N, K, a->value.data(), b->value.data(), out.data(), false);
  auto y = tape.output(std::move(out), a->requires_grad || b->requires_grad);
  if (y->requires_grad) {
    tape.record([a, b, y, M, N, K] {
      if (a->requires_grad) kernels::gemm_nt(M, K, N, y->grad.data(), b->value.data(), a->grad_buffer().data(), true);
      if (b->requires_grad) kernels::gemm_tn(K, N, M, a->value.data(), y->grad.data(), b->grad_buffer().data(), true);
    });
  }
  return y;
}

/// x[R,in] * w[in,out] + b[out]
template <typename T>
Var<T> linear(Tape<T>& tape, const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  detail::require(x->value.rank() == 2 && w->value.rank() == 2 && b->value.rank() == 1, "linear expects x[R,in], w[in,out], b[out]");
  const std::size_t R = x->value.dim(0), in = x->value.dim(1), out_dim = w->value.dim(1);
  detail::require(w->value.dim(0) == in && b->value.dim(0) == out_dim,
                  "linear: x " + shape_string(x->value.shape()) + ", w " + shape_string(w->value.shape()) + ", b " +
                      shape_string(b->value.shape()));
  Tensor<T> out({R, out_dim});
  kernels::linear(R, in, out_dim, x->value.data(), w->value.data(), b->value.data(), out.data());
  auto y = tape.output(std::move(out), x->requires_grad || w->requires_grad || b->requires_grad);
  if (y->requires_grad) {
    tape.record([x, w, b, y, R, in, out_dim] {
      const T* dy = y->grad.data();
      if (x->requires_grad) kernels::gemm_nt(R, in, out_dim, dy, w->value.data(), x->grad_buffer().data(), true);
      if (w->requires_grad) kernels::gemm_tn(in, out_dim, R, x->value.data(), dy, w->grad_buffer().data(), true);
      if (b->requires_grad) {
        T* db = b->grad_buffer().data();
        for (std::size_t r = 0; r < R; ++r) {
          for (std::size_t j = 0; j < out_dim; ++j) db[j] += dy[r * out_dim + j];
        }
      }
    });
  }
  return y;
}

template <typename T>
Var<T> gelu(Tape<T>& tape, const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = kernels::gelu(x->value[i]);
  auto y = tape.output(std::move(out), x->requires_grad);
  if (y->requires_grad) {
    tape.record([x, y] {
      auto& g = x->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += y->grad[i] * kernels::gelu_grad(x->value[i]);
    });
  }
  return y;
}

inline constexpr double kLayerNormEps = 1e-5;

/// Normalizes each row of x[..., d] to zero mean and unit variance, then
/// applies gain and bias.
template <typename T>
Var<T> layernorm(Tape<T>& tape, const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps = kLayerNormEps) {
  const std::size_t d = x->value.cols();
  const std::size_t R = x->value.rows();
  detail::require(d >= 1 && gain->value.numel() == d && bias->value.numel() == d, "layernorm: gain/bias must match the last dimension");
  Tensor<T> out(x->value.shape());
  auto stats = std::make_shared<std::vector<T>>(2 * R);
  kernels::layernorm(R, d, x->value.data(), gain->value.data(), bias->value.data(), eps, out.data(), stats->data(),
                     stats->data() + R);
  auto y = tape.output(std::move(out), x->requires_grad || gain->requires_grad || bias->requires_grad);
  if (y->requires_grad) {
    tape.record([x, gain, bias, y, stats, R, d] {
      const T* mean = stats->data();
      const T* rstd = stats->data() + R;
      T* dg = gain->requires_grad ? gain->grad_buffer().data() : nullptr;
      T* db = bias->requires_grad ? bias->grad_buffer().data() : nullptr;
      T* dx = x->requires_grad ? x->grad_buffer().data() : nullptr;
      std::vector<double> xhat(d);
      std::vector<double> dxhat(d);
      for (std::size_t r = 0; r < R; ++r) {
        const T* xr = x->value.data() + r * d;
        const T* dyr = y->grad.data() + r * d;
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          xhat[j] = (static_cast<double>(xr[j]) - mean[r]) * rstd[r];
          dxhat[j] = static_cast<double>(dyr[j]) * gain->value[j];
          mean_dxhat += dxhat[j];
          mean_dxhat_xhat += dxhat[j] * xhat[j];
          if (dg != nullptr) dg[j] += static_cast<T>(dyr[j] * xhat[j]);
          if (db != nullptr) db[j] += dyr[j];
        }
        if (dx == nullptr) continue;
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          dx[r * d + j] += static_cast<T>(rstd[r] * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat));
        }
      }
    });
  }
  return y;
}

/// Gathers rows of table[V,d]: out[i] = table[ids[i]].
template <typename T>
Var<T> embedding(Tape<T>& tape, const Var<T>& table, std::vector<int> ids) {
  detail::require(table->value.rank() == 2, "embedding table must be rank 2");
  const std::size_t V = table->value.dim(0), d = table->value.dim(1);
  Tensor<T> out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= V) {
      throw Error(ErrorCode::UnknownId, "embedding id " + std::to_string(ids[i]) + " outside table of " + std::to_string(V) + " rows");
    }
    const T* src = table->value.data() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  auto y = tape.output(std::move(out), table->requires_grad);
  if (y->requires_grad) {
    tape.record([table, y, ids = std::move(ids), d] {
      T* g = table->grad_buffer().data();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        T* row = g + static_cast<std::size_t>(ids[i]) * d;
        const T* dy = y->grad.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += dy[j];
      }
    });
  }
  return y;
}

/// Uniform double in [0, 1) from the top 53 bits of the engine output.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Inverted dropout. Identity (returns x itself) when p == 0 or the tape is
/// not recording.
template <typename T>
Var<T> dropout(Tape<T>& tape, const Var<T>& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0 || !tape.recording()) return x;
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(x->value.numel());
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    (*mask)[i] = uniform01(rng) < p ? T{0} : scale;
    out[i] = x->value[i] * (*mask)[i];
  }
  auto y = tape.output(std::move(out), x->requires_grad);
  if (y->requires_grad) {
    tape.record([x, y, mask] {
      auto& g = x->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += y->grad[i] * (*mask)[i];
    });
  }
  return y;
}

/// Row-wise softmax over the last dimension.
template <typename T>
Var<T> softmax_rows(Tape<T>& tape, const Var<T>& x) {
  const std::size_t n = x->value.cols();
  detail::require(n >= 1, "softmax over an empty dimension");
  Tensor<T> out = x->value;
  for (std::size_t r = 0; r < out.rows(); ++r) kernels::softmax_row(out.data() + r * n, n);
  auto y = tape.output(std::move(out), x->requires_grad);
  if (y->requires_grad) {
    tape.record([x, y, n] {
      auto& g = x->grad_buffer();
      for (std::size_t r = 0; r < y->value.rows(); ++r) {
        const T* p = y->value.data() + r * n;
        const T* dy = y->grad.data() + r * n;
        const double inner = kernels::dot(p, dy, n);
        for (std::size_t j = 0; j < n; ++j) g[r * n + j] += static_cast<T>(p[j] * (dy[j] - inner));
      }
    });
  }
  return y;
}

/// Rotary position encoding on x[R, n_heads*head_dim]; row r is rotated by
/// positions[r].
template <typename T>
Var<T> rope(Tape<T>& tape, const Var<T>& x, std::vector<std::size_t> positions, std::size_t n_heads, double theta) {
  const std::size_t d = x->value.cols();
  detail::require(x->value.rows() == positions.size(), "rope: one position per row required");
  detail::require(n_heads >= 1 && d % n_heads == 0, "rope: width not divisible by heads");
  const std::size_t head_dim = d / n_heads;
  if (head_dim % 2 != 0) throw Error(ErrorCode::OddHeadDim, "rope needs an even head dimension, got " + std::to_string(head_dim));
  Tensor<T> out = x->value;
  for (std::size_t r = 0; r < positions.size(); ++r) kernels::rope_row(out.data() + r * d, n_heads, head_dim, positions[r], theta);
  auto y = tape.output(std::move(out), x->requires_grad);
  if (y->requires_grad) {
    tape.record([x, y, positions = std::move(positions), n_heads, head_dim, theta, d] {
      std::vector<T> row(d);
      auto& g = x->grad_buffer();
      for (std::size_t r = 0; r < positions.size(); ++r) {
        std::copy(y->grad.data() + r * d, y->grad.data() + (r + 1) * d, row.begin());
        kernels::rope_row(row.data(), n_heads, head_dim, positions[r], theta, true);
        for (std::size_t j = 0; j < d; ++j) g[r * d + j] += row[j];
      }
    });
  }
  return y;
}

/// Geometry of a batched multi-head attention call. q has batch*q_len rows,
/// k and v have batch*k_len rows; all are n_heads*head_dim wide.
struct AttentionShape {
  std::size_t batch = 1;
  std::size_t q_len = 1;
  std::size_t k_len = 1;
  std::size_t n_heads = 1;
  bool causal = false;
};

/// Scaled dot-product attention with key padding mask (`key_valid`, one flag
/// per key row) and optional causal mask. A query with no visible key yields
/// a zero output row.
template <typename T>
Var<T> attention(Tape<T>& tape, const Var<T>& q, const Var<T>& k, const Var<T>& v, const AttentionShape& s,
                 std::vector<std::uint8_t> key_valid) {
  const std::size_t d = q->value.cols();
  detail::require(s.n_heads >= 1 && d % s.n_heads == 0, "attention: width not divisible by heads");
  detail::require(q->value.rows() == s.batch * s.q_len, "attention: query rows do not match batch*q_len");
  detail::require(k->value.rows() == s.batch * s.k_len && v->value.rows() == s.batch * s.k_len,
                  "attention: key/value rows do not match batch*k_len");
  detail::require(k->value.cols() == d && v->value.cols() == d, "attention: q/k/v widths differ");
  detail::require(key_valid.size() == s.batch * s.k_len, "attention: key mask has the wrong length");
  const std::size_t hd = d / s.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const T neg_inf = -std::numeric_limits<T>::infinity();

  // probs[b][h][i][j]
  auto probs = std::make_shared<std::vector<T>>(s.batch * s.n_heads * s.q_len * s.k_len);
  Tensor<T> out({s.batch * s.q_len, d});
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.n_heads; ++h) {
      T* P = probs->data() + ((b * s.n_heads + h) * s.q_len) * s.k_len;
      for (std::size_t i = 0; i < s.q_len; ++i) {
        const T* qi = q->value.data() + (b * s.q_len + i) * d + h * hd;
        T* row = P + i * s.k_len;
        for (std::size_t j = 0; j < s.k_len; ++j) {
          const bool visible = key_valid[b * s.k_len + j] != 0 && (!s.causal || j <= i);
          row[j] = visible ? static_cast<T>(scale * kernels::dot(qi, k->value.data() + (b * s.k_len + j) * d + h * hd, hd)) : neg_inf;
        }
        kernels::softmax_row(row, s.k_len);
        T* oi = out.data() + (b * s.q_len + i) * d + h * hd;
        for (std::size_t j = 0; j < s.k_len; ++j) {
          const T p = row[j];
          if (p == T{0}) continue;
          const T* vj = v->value.data() + (b * s.k_len + j) * d + h * hd;
          for (std::size_t c = 0; c < hd; ++c) oi[c] += p * vj[c];
        }
      }
    }
  }

  auto y = tape.output(std::move(out), q->requires_grad || k->requires_grad || v->requires_grad);
  if (y->requires_grad) {
    tape.record([q, k, v, y, probs, s, d, hd, scale] {
      T* dq = q->requires_grad ? q->grad_buffer().data() : nullptr;
      T* dk = k->requires_grad ? k->grad_buffer().data() : nullptr;
      T* dv = v->requires_grad ? v->grad_buffer().data() : nullptr;
      std::vector<double> dp(s.k_len);
      for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t h = 0; h < s.n_heads; ++h) {
          const T* P = probs->data() + ((b * s.n_heads + h) * s.q_len) * s.k_len;
          for (std::size_t i = 0; i < s.q_len; ++i) {
            const T* row = P + i * s.k_len;
            const T* doi = y->grad.data() + (b * s.q_len + i) * d + h * hd;
            double inner = 0.0;
            for (std::size_t j = 0; j < s.k_len; ++j) {
              if (row[j] == T{0}) {
                dp[j] = 0.0;
                continue;
              }
              const T* vj = v->value.data() + (b * s.k_len + j) * d + h * hd;
              dp[j] = kernels::dot(doi, vj, hd);
              inner += row[j] * dp[j];
              if (dv != nullptr) {
                T* dvj = dv + (b * s.k_len + j) * d + h * hd;
                for (std::size_t c = 0; c < hd; ++c) dvj[c] += row[j] * doi[c];
              }
            }
            const T* qi = q->value.data() + (b * s.q_len + i) * d + h * hd;
            T* dqi = dq != nullptr ? dq + (b * s.q_len + i) * d + h * hd : nullptr;
            for (std::size_t j = 0; j < s.k_len; ++j) {
              if (row[j] == T{0}) continue;
              const double ds = row[j] * (dp[j] - inner) * scale;
              const T* kj = k->value.data() + (b * s.k_len + j) * d + h * hd;
              if (dqi != nullptr) {
                for (std::size_t c = 0; c < hd; ++c) dqi[c] += static_cast<T>(ds * kj[c]);
              }
              if (dk != nullptr) {
                T* dkj = dk + (b * s.k_len + j) * d + h * hd;
                for (std::size_t c = 0; c < hd; ++c) dkj[c] += static_cast<T>(ds * qi[c]);
              }
            }
          }
        }
      }
    });
  }
  return y;
}

/// Mean negative log-likelihood of `targets` under softmax(logits) over the
/// rows where mask != 0. With no unmasked rows the loss is 0 and all
/// gradients are 0.
template <typename T>
Var<T> cross_entropy_masked(Tape<T>& tape, const Var<T>& logits, const std::vector<int>& targets,
                            const std::vector<std::uint8_t>& mask) {
  detail::require(logits->value.rank() == 2, "cross_entropy_masked expects logits[T,V]");
  const std::size_t N = logits->value.dim(0), V = logits->value.dim(1);
  detail::require(targets.size() == N && mask.size() == N, "cross_entropy_masked: targets/mask length must equal logits rows");
  std::size_t count = 0;
  for (std::size_t t = 0; t < N; ++t) {
    if (mask[t] == 0) continue;
    if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= V) {
      throw Error(ErrorCode::TargetOutOfRange, "target id " + std::to_string(targets[t]) + " outside " + std::to_string(V) + " classes");
    }
    ++count;
  }
  auto probs = std::make_shared<std::vector<T>>(logits->value.values());
  double total = 0.0;
  for (std::size_t t = 0; t < N; ++t) {
    if (mask[t] == 0) continue;
    const T* row = logits->value.data() + t * V;
    double max_v = row[0];
    for (std::size_t j = 1; j < V; ++j) max_v = std::max<double>(max_v, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < V; ++j) z += std::exp(static_cast<double>(row[j]) - max_v);
    total += max_v + std::log(z) - static_cast<double>(row[targets[t]]);
    kernels::softmax_row(probs->data() + t * V, V);
  }
  const double loss = count == 0 ? 0.0 : total / static_cast<double>(count);
  auto y = tape.output(Tensor<T>::scalar(static_cast<T>(loss)), logits->requires_grad);
  if (y->requires_grad) {
    tape.record([logits, y, probs, targets, mask, count, N, V] {
      auto& g = logits->grad_buffer();
      if (count == 0) return;
      const double dy = static_cast<double>(y->grad[0]) / static_cast<double>(count);
      for (std::size_t t = 0; t < N; ++t) {
        if (mask[t] == 0) continue;
        const T* p = probs->data() + t * V;
        T* gr = g.data() + t * V;
        for (std::size_t j = 0; j < V; ++j) {
          const double indicator = static_cast<int>(j) == targets[t] ? 1.0 : 0.0;
          gr[j] += static_cast<T>(dy * (p[j] - indicator));
        }
      }
    });
  }
  return y;
}

}  // namespace ops

}  // namespace latg2p
