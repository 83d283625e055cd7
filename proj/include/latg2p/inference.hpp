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

// Incremental decoder with key/value caches. Produces the same logits as
// Model::forward (up to float rounding) at O(1) decoder work per new token.

#include <cmath>
#include <cstdint>
#include <vector>

#include "latg2p/autodiff.hpp"
#include "latg2p/model.hpp"
#include "latg2p/tensor.hpp"

namespace latg2p {

template <typename T>
class DecodeSession {
 public:
  DecodeSession(const Model<T>& model, const std::vector<int>& src_ids) : model_(model), cfg_(model.config()) {
    if (src_ids.size() > cfg_.max_len) {
      throw Error(ErrorCode::SequenceTooLong, "source length " + std::to_string(src_ids.size()) + " exceeds max_len " +
                                                  std::to_string(cfg_.max_len));
    }
    SeqBatch batch;
    batch.batch = 1;
    batch.src_len = src_ids.size();
    batch.src = src_ids;
    auto tape = Tape<T>::inference();
    const Tensor<T> memory = model_.encode(tape, batch, {})->value;
    src_len_ = src_ids.size();
    src_valid_.resize(src_len_);
    for (std::size_t j = 0; j < src_len_; ++j) src_valid_[j] = src_ids[j] != kPad ? 1 : 0;

    const std::size_t d = cfg_.d_model;
    for (const auto& layer : model_.decoder_layers()) {
      LayerCache cache;
      cache.cross_k.resize(src_len_ * d);
      cache.cross_v.resize(src_len_ * d);
      const auto& p = layer.cross_attn;
      kernels::linear(src_len_, d, d, memory.data(), p.wk->value.data(), p.bk->value.data(), cache.cross_k.data());
      kernels::linear(src_len_, d, d, memory.data(), p.wv->value.data(), p.bv->value.data(), cache.cross_v.data());
      for (std::size_t j = 0; j < src_len_; ++j) {
        kernels::rope_row(cache.cross_k.data() + j * d, cfg_.n_heads, cfg_.head_dim(), j, cfg_.rope_theta);
      }
      caches_.push_back(std::move(cache));
    }
  }

  std::size_t position() const noexcept { return position_; }

  /// Feeds the decoder input token at the next position and returns the
  /// logits row for that position.
  std::vector<T> step(int token) {
    if (position_ >= cfg_.max_len) {
      throw Error(ErrorCode::SequenceTooLong, "decoder position exceeds max_len " + std::to_string(cfg_.max_len));
    }
    if (token < 0 || static_cast<std::size_t>(token) >= cfg_.target_rows()) {
      throw Error(ErrorCode::UnknownId, "decoder token " + std::to_string(token) + " out of range");
    }
    const std::size_t d = cfg_.d_model, f = cfg_.d_ffn;
    const std::size_t pos = position_;
    std::vector<T> x(model_.tgt_embed()->value.data() + static_cast<std::size_t>(token) * d,
                     model_.tgt_embed()->value.data() + static_cast<std::size_t>(token + 1) * d);
    std::vector<T> h(d), q(d), kv(d), attn(d), proj(d), hidden(f);

    for (std::size_t l = 0; l < caches_.size(); ++l) {
      const auto& layer = model_.decoder_layers()[l];
      auto& cache = caches_[l];

      norm(x, layer.ln_self, h);
      const auto& sa = layer.self_attn;
      kernels::linear(1, d, d, h.data(), sa.wq->value.data(), sa.bq->value.data(), q.data());
      kernels::rope_row(q.data(), cfg_.n_heads, cfg_.head_dim(), pos, cfg_.rope_theta);
      kernels::linear(1, d, d, h.data(), sa.wk->value.data(), sa.bk->value.data(), kv.data());
      kernels::rope_row(kv.data(), cfg_.n_heads, cfg_.head_dim(), pos, cfg_.rope_theta);
      cache.self_k.insert(cache.self_k.end(), kv.begin(), kv.end());
      kernels::linear(1, d, d, h.data(), sa.wv->value.data(), sa.bv->value.data(), kv.data());
      cache.self_v.insert(cache.self_v.end(), kv.begin(), kv.end());
      self_valid_.assign(pos + 1, 1);
      attend(q, cache.self_k, cache.self_v, pos + 1, self_valid_, attn);
      kernels::linear(1, d, d, attn.data(), sa.wo->value.data(), sa.bo->value.data(), proj.data());
      for (std::size_t c = 0; c < d; ++c) x[c] += proj[c];

      norm(x, layer.ln_cross, h);
      const auto& ca = layer.cross_attn;
      kernels::linear(1, d, d, h.data(), ca.wq->value.data(), ca.bq->value.data(), q.data());
      kernels::rope_row(q.data(), cfg_.n_heads, cfg_.head_dim(), pos, cfg_.rope_theta);
      attend(q, cache.cross_k, cache.cross_v, src_len_, src_valid_, attn);
      kernels::linear(1, d, d, attn.data(), ca.wo->value.data(), ca.bo->value.data(), proj.data());
      for (std::size_t c = 0; c < d; ++c) x[c] += proj[c];

      norm(x, layer.ln_ffn, h);
      const auto& ff = layer.ffn;
      kernels::linear(1, d, f, h.data(), ff.w1->value.data(), ff.b1->value.data(), hidden.data());
      for (auto& v : hidden) v = kernels::gelu(v);
      kernels::linear(1, f, d, hidden.data(), ff.w2->value.data(), ff.b2->value.data(), proj.data());
      for (std::size_t c = 0; c < d; ++c) x[c] += proj[c];
    }
    if (!caches_.empty()) {
      norm(x, model_.decoder_norm(), h);
      x = h;
    }
    std::vector<T> logits(cfg_.target_rows());
    kernels::linear(1, d, cfg_.target_rows(), x.data(), model_.out_w()->value.data(), model_.out_b()->value.data(), logits.data());
    ++position_;
    return logits;
  }

 private:
  struct LayerCache {
    std::vector<T> self_k, self_v;
    std::vector<T> cross_k, cross_v;
  };

  void norm(const std::vector<T>& x, const LayerNormParams<T>& ln, std::vector<T>& out) const {
    kernels::layernorm(1, cfg_.d_model, x.data(), ln.gain->value.data(), ln.bias->value.data(), ops::kLayerNormEps, out.data());
  }

  void attend(const std::vector<T>& q, const std::vector<T>& keys, const std::vector<T>& values, std::size_t n_keys,
              const std::vector<std::uint8_t>& valid, std::vector<T>& out) {
    const std::size_t d = cfg_.d_model, hd = cfg_.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    scores_.resize(n_keys);
    std::fill(out.begin(), out.end(), T{0});
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
      for (std::size_t j = 0; j < n_keys; ++j) {
        scores_[j] = valid[j] != 0 ? static_cast<T>(scale * kernels::dot(q.data() + h * hd, keys.data() + j * d + h * hd, hd))
                                   : -std::numeric_limits<T>::infinity();
      }
      kernels::softmax_row(scores_.data(), n_keys);
      T* o = out.data() + h * hd;
      for (std::size_t j = 0; j < n_keys; ++j) {
        const T p = scores_[j];
        if (p == T{0}) continue;
        const T* v = values.data() + j * d + h * hd;
        for (std::size_t c = 0; c < hd; ++c) o[c] += p * v[c];
      }
    }
  }

  const Model<T>& model_;
  ModelConfig cfg_;
  std::size_t src_len_ = 0;
  std::vector<std::uint8_t> src_valid_;
  std::vector<std::uint8_t> self_valid_;
  std::vector<LayerCache> caches_;
  std::vector<T> scores_;
  std::size_t position_ = 0;
};

}  // namespace latg2p
