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

// Dense row-major tensors and the raw kernels shared by the autodiff ops and
// the cached inference path. Reductions accumulate in double regardless of T.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "latg2p/error.hpp"

namespace latg2p {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Size of the last dimension (1 for scalars).
  std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
  /// Product of all leading dimensions.
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : numel() / cols(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  T item() const {
    if (numel() != 1) throw Error(ErrorCode::NotScalar, "tensor of shape " + shape_string(shape_) + " is not a scalar");
    return data_[0];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  void reshape(Shape shape) {
    if (shape_numel(shape) != numel()) {
      throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

namespace kernels {

inline void transpose(std::size_t rows, std::size_t cols, const auto* __restrict src, auto* __restrict dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t r1 = std::min(rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

/// C[M,N] (+)= A[M,K] * B[K,N]. Each output element accumulates over k in
/// ascending order, independent of M, so row results never depend on how many
/// other rows are in the batch.
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* __restrict A, const T* __restrict B, T* __restrict C,
             bool accumulate) {
  if (!accumulate) std::fill(C, C + M * N, T{0});
  constexpr std::size_t kColBlock = 256;
  for (std::size_t j0 = 0; j0 < N; j0 += kColBlock) {
    const std::size_t nb = std::min(N, j0 + kColBlock) - j0;
    std::size_t i = 0;
    for (; i + 4 <= M; i += 4) {
      T* __restrict c0 = C + (i + 0) * N + j0;
      T* __restrict c1 = C + (i + 1) * N + j0;
      T* __restrict c2 = C + (i + 2) * N + j0;
      T* __restrict c3 = C + (i + 3) * N + j0;
      for (std::size_t k = 0; k < K; ++k) {
        const T a0 = A[(i + 0) * K + k];
        const T a1 = A[(i + 1) * K + k];
        const T a2 = A[(i + 2) * K + k];
        const T a3 = A[(i + 3) * K + k];
        const T* __restrict b = B + k * N + j0;
        for (std::size_t j = 0; j < nb; ++j) {
          const T bj = b[j];
          c0[j] += a0 * bj;
          c1[j] += a1 * bj;
          c2[j] += a2 * bj;
          c3[j] += a3 * bj;
        }
      }
    }
    for (; i < M; ++i) {
      T* __restrict c = C + i * N + j0;
      for (std::size_t k = 0; k < K; ++k) {
        const T a = A[i * K + k];
        const T* __restrict b = B + k * N + j0;
        for (std::size_t j = 0; j < nb; ++j) c[j] += a * b[j];
      }
    }
  }
}

/// C[M,N] (+)= A[M,K] * B[N,K]^T
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
  thread_local std::vector<T> scratch;
  scratch.resize(N * K);
  transpose(N, K, B, scratch.data());
  gemm_nn(M, N, K, A, scratch.data(), C, accumulate);
}

/// C[M,N] (+)= A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
  thread_local std::vector<T> scratch;
  scratch.resize(M * K);
  transpose(K, M, A, scratch.data());
  gemm_nn(M, N, K, scratch.data(), B, C, accumulate);
}

/// y[R,out] = x[R,in] * w[in,out] + b[out]
template <typename T>
void linear(std::size_t rows, std::size_t in, std::size_t out, const T* x, const T* w, const T* b, T* y) {
  for (std::size_t r = 0; r < rows; ++r) std::copy(b, b + out, y + r * out);
  gemm_nn(rows, out, in, x, w, y, true);
}

/// Numerically stable softmax of one row, in place. A row whose entries are
/// all -inf becomes all zeros.
template <typename T>
void softmax_row(T* row, std::size_t n) {
  T max_v = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < n; ++j) max_v = std::max(max_v, row[j]);
  if (max_v == -std::numeric_limits<T>::infinity()) {
    std::fill(row, row + n, T{0});
    return;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double e = std::exp(static_cast<double>(row[j]) - static_cast<double>(max_v));
    row[j] = static_cast<T>(e);
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < n; ++j) row[j] = static_cast<T>(static_cast<double>(row[j]) * inv);
}

/// Row-wise layer normalization. Stores the per-row mean and reciprocal
/// standard deviation when the caller asks for them (needed by backward).
template <typename T>
void layernorm(std::size_t rows, std::size_t d, const T* x, const T* gain, const T* bias, double eps, T* y,
               T* mean_out = nullptr, T* rstd_out = nullptr) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    T* yr = y + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      yr[j] = static_cast<T>((xr[j] - mean) * rstd * gain[j] + bias[j]);
    }
    if (mean_out != nullptr) mean_out[r] = static_cast<T>(mean);
    if (rstd_out != nullptr) rstd_out[r] = static_cast<T>(rstd);
  }
}

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Exact (erf-based) GELU.
template <typename T>
T gelu(T x) {
  return static_cast<T>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
}

template <typename T>
T gelu_grad(T x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * static_cast<double>(x) * x);
  return static_cast<T>(cdf + x * pdf);
}

/// Rotation angle for pair index `pair` at `position`: position * theta^(-2*pair/head_dim).
inline double rope_angle(std::size_t position, std::size_t pair, std::size_t head_dim, double theta) {
  return static_cast<double>(position) * std::pow(theta, -2.0 * static_cast<double>(pair) / static_cast<double>(head_dim));
}

/// Cached cos/sin of rope_angle for positions [0, capacity).
class RopeTable {
 public:
  RopeTable(std::size_t head_dim, double theta) : head_dim_(head_dim), theta_(theta) {}

  std::size_t head_dim() const noexcept { return head_dim_; }
  double theta() const noexcept { return theta_; }

  void ensure(std::size_t positions) {
    const std::size_t half = head_dim_ / 2;
    for (std::size_t p = capacity_; p < positions; ++p) {
      for (std::size_t i = 0; i < half; ++i) {
        const double angle = rope_angle(p, i, head_dim_, theta_);
        cos_.push_back(std::cos(angle));
        sin_.push_back(std::sin(angle));
      }
    }
    capacity_ = std::max(capacity_, positions);
  }

  const double* cos_at(std::size_t position) const noexcept { return cos_.data() + position * (head_dim_ / 2); }
  const double* sin_at(std::size_t position) const noexcept { return sin_.data() + position * (head_dim_ / 2); }

 private:
  std::size_t head_dim_;
  double theta_;
  std::size_t capacity_ = 0;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

inline RopeTable& rope_table(std::size_t head_dim, double theta, std::size_t positions) {
  thread_local std::vector<RopeTable> tables;
  for (auto& t : tables) {
    if (t.head_dim() == head_dim && t.theta() == theta) {
      t.ensure(positions);
      return t;
    }
  }
  tables.emplace_back(head_dim, theta);
  tables.back().ensure(positions);
  return tables.back();
}

/// Rotates each (2i, 2i+1) pair of every head in `row` (length n_heads*head_dim).
/// `inverse` applies the opposite rotation (used by backward).
template <typename T>
void rope_row(T* row, std::size_t n_heads, std::size_t head_dim, std::size_t position, double theta, bool inverse = false) {
  if (position == 0) return;
  const RopeTable& table = rope_table(head_dim, theta, position + 1);
  const double* cs = table.cos_at(position);
  const double* sn = table.sin_at(position);
  for (std::size_t h = 0; h < n_heads; ++h) {
    T* head = row + h * head_dim;
    for (std::size_t i = 0; i < head_dim / 2; ++i) {
      const double c = cs[i];
      const double s = inverse ? -sn[i] : sn[i];
      const double x0 = head[2 * i];
      const double x1 = head[2 * i + 1];
      head[2 * i] = static_cast<T>(x0 * c - x1 * s);
      head[2 * i + 1] = static_cast<T>(x0 * s + x1 * c);
    }
  }
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
  return static_cast<T>(acc);
}

}  // namespace kernels

}  // namespace latg2p
