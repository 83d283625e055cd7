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

// Encoder-decoder Transformer: pre-layernorm blocks, rotary positions on
// queries and keys, GELU feed-forward, untied output projection.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latg2p/autodiff.hpp"
#include "latg2p/error.hpp"
#include "latg2p/language.hpp"
#include "latg2p/tensor.hpp"
#include "latg2p/unicode.hpp"
#include "latg2p/vocab.hpp"

namespace latg2p {

struct ModelConfig {
  std::size_t d_model = 256;
  std::size_t n_heads = 8;
  std::size_t n_enc_layers = 4;
  std::size_t n_dec_layers = 4;
  std::size_t d_ffn = 1024;
  std::size_t grapheme_vocab_size = 60;  ///< grapheme symbols, excluding specials and language tokens
  std::size_t phoneme_vocab_size = 109;  ///< phoneme symbols, excluding specials
  std::size_t n_langs = kNumLanguages;
  double dropout = 0.1;
  double rope_theta = 10000.0;
  std::size_t max_len = 64;
  bool use_lang_id = true;

  bool operator==(const ModelConfig&) const = default;

  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t source_rows() const { return kNumSpecials + (use_lang_id ? n_langs : 0) + grapheme_vocab_size; }
  std::size_t target_rows() const { return kNumSpecials + phoneme_vocab_size; }

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (d_model == 0 || n_heads == 0 || d_ffn == 0) fail("d_model, n_heads and d_ffn must be >= 1");
    if (d_model % n_heads != 0) fail("d_model " + std::to_string(d_model) + " is not divisible by n_heads " + std::to_string(n_heads));
    if (head_dim() % 2 != 0) fail("head_dim " + std::to_string(head_dim()) + " must be even for rotary pairing");
    if (phoneme_vocab_size == 0 || grapheme_vocab_size == 0) fail("vocabulary sizes must be >= 1");
    if (n_langs != kNumLanguages) fail("n_langs must be " + std::to_string(kNumLanguages));
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
    if (rope_theta <= 0.0) fail("rope_theta must be positive");
    if (max_len < 2) fail("max_len must be >= 2");
  }

  /// The published architecture: 4+4 layers, 256-d, 8 heads, 109 phonemes.
  static ModelConfig reference() { return ModelConfig{}; }

  /// Desk-scale configuration used by --toy runs and the acceptance suite.
  static ModelConfig toy() {
    ModelConfig cfg;
    cfg.d_model = 64;
    cfg.n_heads = 4;
    cfg.n_enc_layers = 2;
    cfg.n_dec_layers = 2;
    cfg.d_ffn = 256;
    cfg.dropout = 0.0;
    return cfg;
  }

  /// Copies the vocabulary sizes of a built vocab into the config.
  ModelConfig with_vocab(const VocabPair& vocab) const {
    ModelConfig out = *this;
    out.grapheme_vocab_size = vocab.graphemes().size();
    out.phoneme_vocab_size = vocab.phonemes().size();
    return out;
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},
                     {"n_heads", c.n_heads},
                     {"n_enc_layers", c.n_enc_layers},
                     {"n_dec_layers", c.n_dec_layers},
                     {"d_ffn", c.d_ffn},
                     {"grapheme_vocab_size", c.grapheme_vocab_size},
                     {"phoneme_vocab_size", c.phoneme_vocab_size},
                     {"n_langs", c.n_langs},
                     {"dropout", c.dropout},
                     {"rope_theta", c.rope_theta},
                     {"max_len", c.max_len},
                     {"use_lang_id", c.use_lang_id}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("d_model").get_to(c.d_model);
  j.at("n_heads").get_to(c.n_heads);
  j.at("n_enc_layers").get_to(c.n_enc_layers);
  j.at("n_dec_layers").get_to(c.n_dec_layers);
  j.at("d_ffn").get_to(c.d_ffn);
  j.at("grapheme_vocab_size").get_to(c.grapheme_vocab_size);
  j.at("phoneme_vocab_size").get_to(c.phoneme_vocab_size);
  j.at("n_langs").get_to(c.n_langs);
  j.at("dropout").get_to(c.dropout);
  j.at("rope_theta").get_to(c.rope_theta);
  j.at("max_len").get_to(c.max_len);
  j.at("use_lang_id").get_to(c.use_lang_id);
}

/// Parameter count implied by a config, written out from the layer layout:
///   attention block  4 (d^2 + d)            (q, k, v, o projections)
///   feed-forward     d f + f + f d + d
///   layernorm        2 d
///   encoder layer    attention + ffn + 2 layernorms
///   decoder layer    2 attention + ffn + 3 layernorms
/// plus both embeddings, a final layernorm per non-empty stack, and the
/// output projection d V + V.
inline std::size_t closed_form_param_count(const ModelConfig& c) {
  const std::size_t d = c.d_model, f = c.d_ffn;
  const std::size_t attn = 4 * (d * d + d);
  const std::size_t ffn = d * f + f + f * d + d;
  const std::size_t ln = 2 * d;
  const std::size_t enc_layer = attn + ffn + 2 * ln;
  const std::size_t dec_layer = 2 * attn + ffn + 3 * ln;
  return c.source_rows() * d + c.target_rows() * d + c.n_enc_layers * enc_layer + (c.n_enc_layers > 0 ? ln : 0) +
         c.n_dec_layers * dec_layer + (c.n_dec_layers > 0 ? ln : 0) + d * c.target_rows() + c.target_rows();
}

template <typename T>
struct LayerNormParams {
  Var<T> gain, bias;
};

template <typename T>
struct AttentionParams {
  Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

template <typename T>
struct FeedForwardParams {
  Var<T> w1, b1, w2, b2;
};

template <typename T>
struct EncoderLayer {
  LayerNormParams<T> ln_attn;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ln_ffn;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct DecoderLayer {
  LayerNormParams<T> ln_self;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ln_cross;
  AttentionParams<T> cross_attn;
  LayerNormParams<T> ln_ffn;
  FeedForwardParams<T> ffn;
};

/// Padded batch in the layout the model consumes. Row b of `src` holds
/// src_len ids; `tgt_in` is the decoder input (BOS + phonemes) and `tgt_out`
/// the labels (phonemes + EOS), both tgt_len wide and PAD-filled.
struct SeqBatch {
  std::size_t batch = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<int> src;
  std::vector<int> tgt_in;
  std::vector<int> tgt_out;
  std::vector<std::uint8_t> tgt_mask;
};

struct ForwardContext {
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct ParamCount {
  std::size_t total = 0;
  std::map<std::string, std::size_t> breakdown;
};

template <typename T>
class Model {
 public:
  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const noexcept { return cfg_; }

  /// Parameters in canonical order; this order defines checkpoint layout,
  /// initialization order and the optimizer state layout.
  std::vector<std::pair<std::string, Var<T>>> named_parameters() const {
    std::vector<std::pair<std::string, Var<T>>> out;
    out.emplace_back("src_embed", src_embed_);
    out.emplace_back("tgt_embed", tgt_embed_);
    auto add_ln = [&](const std::string& p, const LayerNormParams<T>& ln) {
      out.emplace_back(p + ".gain", ln.gain);
      out.emplace_back(p + ".bias", ln.bias);
    };
    auto add_attn = [&](const std::string& p, const AttentionParams<T>& a) {
      out.emplace_back(p + ".wq", a.wq);
      out.emplace_back(p + ".bq", a.bq);
      out.emplace_back(p + ".wk", a.wk);
      out.emplace_back(p + ".bk", a.bk);
      out.emplace_back(p + ".wv", a.wv);
      out.emplace_back(p + ".bv", a.bv);
      out.emplace_back(p + ".wo", a.wo);
      out.emplace_back(p + ".bo", a.bo);
    };
    auto add_ffn = [&](const std::string& p, const FeedForwardParams<T>& f) {
      out.emplace_back(p + ".w1", f.w1);
      out.emplace_back(p + ".b1", f.b1);
      out.emplace_back(p + ".w2", f.w2);
      out.emplace_back(p + ".b2", f.b2);
    };
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
      const std::string p = "enc." + std::to_string(i);
      add_ln(p + ".ln_attn", encoder_[i].ln_attn);
      add_attn(p + ".self_attn", encoder_[i].self_attn);
      add_ln(p + ".ln_ffn", encoder_[i].ln_ffn);
      add_ffn(p + ".ffn", encoder_[i].ffn);
    }
    if (!encoder_.empty()) add_ln("enc.final_ln", enc_norm_);
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
      const std::string p = "dec." + std::to_string(i);
      add_ln(p + ".ln_self", decoder_[i].ln_self);
      add_attn(p + ".self_attn", decoder_[i].self_attn);
      add_ln(p + ".ln_cross", decoder_[i].ln_cross);
      add_attn(p + ".cross_attn", decoder_[i].cross_attn);
      add_ln(p + ".ln_ffn", decoder_[i].ln_ffn);
      add_ffn(p + ".ffn", decoder_[i].ffn);
    }
    if (!decoder_.empty()) add_ln("dec.final_ln", dec_norm_);
    out.emplace_back("out_proj.w", out_w_);
    out.emplace_back("out_proj.b", out_b_);
    return out;
  }

  std::vector<Var<T>> parameters() const {
    std::vector<Var<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
  }

  void zero_grad() const {
    for (auto& p : parameters()) p->zero_grad();
  }

  /// Embedding row for a vocabulary source id. Without language ids the six
  /// language rows do not exist and grapheme ids shift down by six.
  int source_row(int id) const {
    if (cfg_.use_lang_id || id < kFirstLangToken) return id;
    if (id < kFirstGrapheme) throw Error(ErrorCode::UnknownId, "language token " + std::to_string(id) + " given to a model without language ids");
    return id - static_cast<int>(kNumLanguages);
  }

  /// Runs the encoder over batch.src and returns memory [batch*src_len, d].
  Var<T> encode(Tape<T>& tape, const SeqBatch& batch, const ForwardContext& ctx) const {
    std::vector<int> rows(batch.src.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = source_row(batch.src[i]);
    auto x = ops::embedding(tape, src_embed_, std::move(rows));
    x = maybe_dropout(tape, x, ctx);
    const auto positions = positions_for(batch.batch, batch.src_len);
    const auto valid = valid_mask(batch.src);
    ops::AttentionShape shape{batch.batch, batch.src_len, batch.src_len, cfg_.n_heads, false};
    for (const auto& layer : encoder_) {
      auto h = ops::layernorm(tape, x, layer.ln_attn.gain, layer.ln_attn.bias);
      auto a = attention_block(tape, h, h, layer.self_attn, shape, positions, positions, valid);
      x = ops::add(tape, x, maybe_dropout(tape, a, ctx));
      h = ops::layernorm(tape, x, layer.ln_ffn.gain, layer.ln_ffn.bias);
      x = ops::add(tape, x, maybe_dropout(tape, feed_forward(tape, h, layer.ffn, ctx), ctx));
    }
    if (!encoder_.empty()) x = ops::layernorm(tape, x, enc_norm_.gain, enc_norm_.bias);
    return x;
  }

  /// Logits [batch*tgt_len, target_rows]. Row (b, t) depends on tgt_in[b, 0..t]
  /// and the whole source row b.
  Var<T> forward(Tape<T>& tape, const SeqBatch& batch, const ForwardContext& ctx = {}) const {
    check_batch(batch);
    auto memory = encode(tape, batch, ctx);
    auto y = ops::embedding(tape, tgt_embed_, batch.tgt_in);
    y = maybe_dropout(tape, y, ctx);
    const auto tgt_positions = positions_for(batch.batch, batch.tgt_len);
    const auto src_positions = positions_for(batch.batch, batch.src_len);
    const auto tgt_valid = valid_mask(batch.tgt_in);
    const auto src_valid = valid_mask(batch.src);
    ops::AttentionShape self_shape{batch.batch, batch.tgt_len, batch.tgt_len, cfg_.n_heads, true};
    ops::AttentionShape cross_shape{batch.batch, batch.tgt_len, batch.src_len, cfg_.n_heads, false};
    for (const auto& layer : decoder_) {
      auto h = ops::layernorm(tape, y, layer.ln_self.gain, layer.ln_self.bias);
      auto a = attention_block(tape, h, h, layer.self_attn, self_shape, tgt_positions, tgt_positions, tgt_valid);
      y = ops::add(tape, y, maybe_dropout(tape, a, ctx));
      h = ops::layernorm(tape, y, layer.ln_cross.gain, layer.ln_cross.bias);
      auto c = attention_block(tape, h, memory, layer.cross_attn, cross_shape, tgt_positions, src_positions, src_valid);
      y = ops::add(tape, y, maybe_dropout(tape, c, ctx));
      h = ops::layernorm(tape, y, layer.ln_ffn.gain, layer.ln_ffn.bias);
      y = ops::add(tape, y, maybe_dropout(tape, feed_forward(tape, h, layer.ffn, ctx), ctx));
    }
    if (!decoder_.empty()) y = ops::layernorm(tape, y, dec_norm_.gain, dec_norm_.bias);
    return ops::linear(tape, y, out_w_, out_b_);
  }

  // Read access for the cached inference path and checkpoint code.
  const Var<T>& src_embed() const { return src_embed_; }
  const Var<T>& tgt_embed() const { return tgt_embed_; }
  const std::vector<EncoderLayer<T>>& encoder_layers() const { return encoder_; }
  const std::vector<DecoderLayer<T>>& decoder_layers() const { return decoder_; }
  const LayerNormParams<T>& encoder_norm() const { return enc_norm_; }
  const LayerNormParams<T>& decoder_norm() const { return dec_norm_; }
  const Var<T>& out_w() const { return out_w_; }
  const Var<T>& out_b() const { return out_b_; }

  /// Allocates zero-valued tensors for `cfg`. Values come from init_model or
  /// a checkpoint.
  static Model allocate(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    const std::size_t d = cfg.d_model, f = cfg.d_ffn;
    auto mat = [](std::size_t r, std::size_t c) { return make_parameter(Tensor<T>({r, c})); };
    auto vec = [](std::size_t n) { return make_parameter(Tensor<T>({n})); };
    auto ln = [&] { return LayerNormParams<T>{vec(d), vec(d)}; };
    auto attn = [&] { return AttentionParams<T>{mat(d, d), vec(d), mat(d, d), vec(d), mat(d, d), vec(d), mat(d, d), vec(d)}; };
    auto ffn = [&] { return FeedForwardParams<T>{mat(d, f), vec(f), mat(f, d), vec(d)}; };
    m.src_embed_ = mat(cfg.source_rows(), d);
    m.tgt_embed_ = mat(cfg.target_rows(), d);
    for (std::size_t i = 0; i < cfg.n_enc_layers; ++i) m.encoder_.push_back({ln(), attn(), ln(), ffn()});
    m.enc_norm_ = ln();
    for (std::size_t i = 0; i < cfg.n_dec_layers; ++i) m.decoder_.push_back({ln(), attn(), ln(), attn(), ln(), ffn()});
    m.dec_norm_ = ln();
    m.out_w_ = mat(d, cfg.target_rows());
    m.out_b_ = vec(cfg.target_rows());
    return m;
  }

 private:
  static std::vector<std::size_t> positions_for(std::size_t batch, std::size_t len) {
    std::vector<std::size_t> out(batch * len);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i % len;
    return out;
  }

  static std::vector<std::uint8_t> valid_mask(const std::vector<int>& ids) {
    std::vector<std::uint8_t> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = ids[i] != kPad ? 1 : 0;
    return out;
  }

  void check_batch(const SeqBatch& b) const {
    if (b.src.size() != b.batch * b.src_len || b.tgt_in.size() != b.batch * b.tgt_len) {
      throw Error(ErrorCode::ShapeMismatch, "batch id buffers do not match batch geometry");
    }
    if (b.src_len > cfg_.max_len || b.tgt_len > cfg_.max_len) {
      throw Error(ErrorCode::SequenceTooLong, "sequence length " + std::to_string(std::max(b.src_len, b.tgt_len)) +
                                                  " exceeds max_len " + std::to_string(cfg_.max_len));
    }
  }

  Var<T> maybe_dropout(Tape<T>& tape, const Var<T>& x, const ForwardContext& ctx) const {
    if (ctx.rng == nullptr || ctx.dropout <= 0.0) return x;
    return ops::dropout(tape, x, ctx.dropout, *ctx.rng);
  }

  Var<T> attention_block(Tape<T>& tape, const Var<T>& query_in, const Var<T>& kv_in, const AttentionParams<T>& p,
                         const ops::AttentionShape& shape, const std::vector<std::size_t>& q_pos,
                         const std::vector<std::size_t>& k_pos, const std::vector<std::uint8_t>& key_valid) const {
    auto q = ops::rope(tape, ops::linear(tape, query_in, p.wq, p.bq), q_pos, cfg_.n_heads, cfg_.rope_theta);
    auto k = ops::rope(tape, ops::linear(tape, kv_in, p.wk, p.bk), k_pos, cfg_.n_heads, cfg_.rope_theta);
    auto v = ops::linear(tape, kv_in, p.wv, p.bv);
    auto a = ops::attention(tape, q, k, v, shape, key_valid);
    return ops::linear(tape, a, p.wo, p.bo);
  }

  Var<T> feed_forward(Tape<T>& tape, const Var<T>& h, const FeedForwardParams<T>& p, const ForwardContext& ctx) const {
    auto hidden = ops::gelu(tape, ops::linear(tape, h, p.w1, p.b1));
    return ops::linear(tape, maybe_dropout(tape, hidden, ctx), p.w2, p.b2);
  }

  ModelConfig cfg_;
  Var<T> src_embed_, tgt_embed_;
  std::vector<EncoderLayer<T>> encoder_;
  LayerNormParams<T> enc_norm_;
  std::vector<DecoderLayer<T>> decoder_;
  LayerNormParams<T> dec_norm_;
  Var<T> out_w_, out_b_;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in the input width of
/// a [in, out] matrix (d_model for embedding tables); biases zero; layernorm
/// gains one. Draws follow named_parameters() order.
template <typename T>
Model<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model<T> m = Model<T>::allocate(cfg);
  std::mt19937_64 rng(seed);
  for (auto& [name, p] : m.named_parameters()) {
    auto& value = p->value;
    const bool is_gain = name.ends_with(".gain");
    if (value.rank() == 1) {
      value.fill(is_gain ? T{1} : T{0});
      continue;
    }
    const bool is_embedding = name == "src_embed" || name == "tgt_embed";
    const double fan_in = static_cast<double>(is_embedding ? value.dim(1) : value.dim(0));
    const double bound = 1.0 / std::sqrt(fan_in);
    for (auto& v : value.values()) v = static_cast<T>((2.0 * ops::uniform01(rng) - 1.0) * bound);
  }
  return m;
}

/// Total parameter count by summing tensor sizes, with a breakdown that
/// isolates the language-id rows of the source embedding.
template <typename T>
ParamCount count_params(const Model<T>& m) {
  ParamCount out;
  const ModelConfig& cfg = m.config();
  for (const auto& [name, p] : m.named_parameters()) {
    const std::size_t n = p->value.numel();
    out.total += n;
    std::string group;
    if (name == "src_embed") {
      const std::size_t lang_rows = cfg.use_lang_id ? cfg.n_langs : 0;
      out.breakdown["lang_id_embedding"] += lang_rows * cfg.d_model;
      out.breakdown["source_embedding"] += n - lang_rows * cfg.d_model;
      continue;
    }
    if (name == "tgt_embed") {
      group = "target_embedding";
    } else if (name.starts_with("enc.")) {
      group = "encoder";
    } else if (name.starts_with("dec.")) {
      group = "decoder";
    } else {
      group = "output_projection";
    }
    out.breakdown[group] += n;
  }
  return out;
}

/// Source ids as the given model expects them: with the language token in
/// front, or without it for the no-language-id variant.
inline std::vector<int> model_source_ids(const ModelConfig& cfg, std::string_view word, LanguageId lang, const VocabPair& vocab) {
  auto ids = encode_source(word, lang, vocab);
  if (!cfg.use_lang_id) ids.erase(ids.begin());
  return ids;
}

/// Single-example forward: logits [len(tgt_ids), target_rows].
template <typename T>
Tensor<T> forward(const Model<T>& m, const std::vector<int>& src_ids, const std::vector<int>& tgt_ids) {
  SeqBatch batch;
  batch.batch = 1;
  batch.src_len = src_ids.size();
  batch.tgt_len = tgt_ids.size();
  batch.src = src_ids;
  batch.tgt_in = tgt_ids;
  if (m.config().use_lang_id && (src_ids.empty() || src_ids[0] < kFirstLangToken || src_ids[0] >= kFirstGrapheme)) {
    throw Error(ErrorCode::InvalidConfig, "source sequence must start with a language token");
  }
  auto tape = Tape<T>::inference();
  return m.forward(tape, batch)->value;
}

/// Rotates q_or_k[heads, T, head_dim] in place semantics: row t of every head
/// is rotated by positions[t].
template <typename T>
Tensor<T> apply_rope(const Tensor<T>& q_or_k, const std::vector<std::size_t>& positions, double theta) {
  if (q_or_k.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "apply_rope expects [heads, T, head_dim]");
  const std::size_t heads = q_or_k.dim(0), len = q_or_k.dim(1), hd = q_or_k.dim(2);
  if (hd % 2 != 0) throw Error(ErrorCode::OddHeadDim, "head_dim " + std::to_string(hd) + " is odd");
  if (positions.size() != len) throw Error(ErrorCode::ShapeMismatch, "apply_rope needs one position per time step");
  Tensor<T> out = q_or_k;
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t t = 0; t < len; ++t) kernels::rope_row(out.data() + (h * len + t) * hd, 1, hd, positions[t], theta);
  }
  return out;
}

}  // namespace latg2p
