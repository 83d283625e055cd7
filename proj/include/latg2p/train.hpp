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

// Teacher-forced training: warmup + cosine learning-rate schedule, AdamW
// with decoupled weight decay, global-norm clipping, padded batching and the
// step loop with periodic validation and best-checkpoint selection.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "latg2p/autodiff.hpp"
#include "latg2p/checkpoint.hpp"
#include "latg2p/corpus.hpp"
#include "latg2p/error.hpp"
#include "latg2p/eval.hpp"
#include "latg2p/log.hpp"
#include "latg2p/model.hpp"
#include "latg2p/vocab.hpp"

namespace latg2p {

struct TrainConfig {
  std::size_t total_steps = 100000;
  std::size_t warmup_steps = 10000;
  double peak_lr = 3e-4;
  std::size_t batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip_norm = 1.0;
  std::size_t val_every = 1000;
  std::size_t log_every = 100;
  std::uint64_t seed = 1;
  /// Language sampling temperature: 1 keeps corpus proportions, larger
  /// values flatten them towards uniform.
  double lang_temperature = 1.0;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (total_steps == 0 || batch_size == 0 || val_every == 0 || log_every == 0) fail("step counts and batch size must be >= 1");
    if (warmup_steps >= total_steps) fail("warmup_steps must be below total_steps");
    if (!(peak_lr > 0.0) || !(eps > 0.0) || !(grad_clip_norm > 0.0) || !(lang_temperature > 0.0)) fail("rates must be positive");
    if (weight_decay < 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) fail("bad optimizer coefficients");
  }

  static TrainConfig reference() { return TrainConfig{}; }

  /// 2k-step schedule for the toy model on the bundled fixture.
  static TrainConfig toy() {
    TrainConfig cfg;
    cfg.total_steps = 2000;
    cfg.warmup_steps = 200;
    cfg.peak_lr = 2e-3;
    cfg.val_every = 500;
    cfg.log_every = 50;
    return cfg;
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"total_steps", c.total_steps}, {"warmup_steps", c.warmup_steps},
                     {"peak_lr", c.peak_lr},         {"batch_size", c.batch_size},
                     {"beta1", c.beta1},             {"beta2", c.beta2},
                     {"eps", c.eps},                 {"weight_decay", c.weight_decay},
                     {"grad_clip_norm", c.grad_clip_norm}, {"val_every", c.val_every},
                     {"log_every", c.log_every},     {"seed", c.seed},
                     {"lang_temperature", c.lang_temperature}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("total_steps").get_to(c.total_steps);
  j.at("warmup_steps").get_to(c.warmup_steps);
  j.at("peak_lr").get_to(c.peak_lr);
  j.at("batch_size").get_to(c.batch_size);
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("eps").get_to(c.eps);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("grad_clip_norm").get_to(c.grad_clip_norm);
  j.at("val_every").get_to(c.val_every);
  j.at("log_every").get_to(c.log_every);
  j.at("seed").get_to(c.seed);
  j.at("lang_temperature").get_to(c.lang_temperature);
}

/// Linear ramp from 0 over [0, warmup), then half-cosine decay reaching 0 at
/// total_steps.
inline double lr_at_step(std::size_t step, const TrainConfig& cfg) {
  if (step > cfg.total_steps) {
    throw Error(ErrorCode::StepOutOfRange, "step " + std::to_string(step) + " beyond total_steps " + std::to_string(cfg.total_steps));
  }
  if (step < cfg.warmup_steps) return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  const double progress = static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

template <typename T>
struct OptimizerState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;

  static OptimizerState for_shapes(const std::vector<Shape>& shapes) {
    OptimizerState s;
    for (const auto& shape : shapes) {
      s.m.emplace_back(shape);
      s.v.emplace_back(shape);
    }
    return s;
  }

  static OptimizerState for_model(const Model<T>& model) {
    std::vector<Shape> shapes;
    for (const auto& p : model.parameters()) shapes.push_back(p->value.shape());
    return for_shapes(shapes);
  }
};

/// One AdamW update. Weight decay is decoupled: params shrink by
/// (1 - lr*wd) before the bias-corrected Adam step is subtracted.
template <typename T>
void adamw_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads, OptimizerState<T>& state,
                double lr, const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adamw: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != state.m[i].shape()) {
      throw Error(ErrorCode::ShapeMismatch, "adamw: shape mismatch at parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->data();
    const T* g = grads[i]->data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    for (std::size_t j = 0; j < params[i]->numel(); ++j) {
      const double gj = g[j];
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / bias1) / (std::sqrt(vj / bias2) + cfg.eps);
      p[j] = static_cast<T>(static_cast<double>(p[j]) * decay - update);
    }
  }
}

/// Applies the accumulated gradients of `model`: checks they are finite,
/// clips their global L2 norm and runs AdamW. Returns the pre-clip norm.
template <typename T>
double apply_gradients(const Model<T>& model, OptimizerState<T>& state, double lr, const TrainConfig& cfg) {
  const auto params = model.parameters();
  double sq = 0.0;
  for (const auto& p : params) {
    auto& g = p->grad_buffer();
    for (T v : g.values()) sq += static_cast<double>(v) * v;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw Error(ErrorCode::NonFiniteLoss, "gradient norm is not finite");
  if (norm > cfg.grad_clip_norm) {
    const T scale = static_cast<T>(cfg.grad_clip_norm / norm);
    for (const auto& p : params) {
      for (T& v : p->grad.values()) v *= scale;
    }
  }
  std::vector<Tensor<T>*> values;
  std::vector<const Tensor<T>*> grads;
  for (const auto& p : params) {
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  adamw_step(values, grads, state, lr, cfg);
  return norm;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct EncodedExample {
  std::vector<int> src;
  std::vector<int> tgt;  ///< BOS + phonemes + EOS
  LanguageId lang = LanguageId::en;
};

/// Encodes entries for a model. Entries that do not fit in max_len are
/// dropped with a warning.
inline std::vector<EncodedExample> encode_examples(const std::vector<WordEntry>& entries, const VocabPair& vocab, const ModelConfig& cfg) {
  std::vector<EncodedExample> out;
  std::size_t skipped = 0;
  for (const auto& e : entries) {
    EncodedExample ex{model_source_ids(cfg, e.word, e.lang, vocab), encode_target(e.phonemes, vocab), e.lang};
    if (ex.src.size() > cfg.max_len || ex.tgt.size() - 1 > cfg.max_len) {
      ++skipped;
      continue;
    }
    out.push_back(std::move(ex));
  }
  if (skipped > 0) log_warn("skipped " + std::to_string(skipped) + " entries longer than max_len");
  return out;
}

/// Pads a set of examples into one batch. Decoder input is tgt[:-1] and the
/// labels are tgt[1:].
inline SeqBatch collate(const std::vector<EncodedExample>& examples, const std::vector<std::size_t>& indices) {
  SeqBatch b;
  b.batch = indices.size();
  for (std::size_t i : indices) {
    b.src_len = std::max(b.src_len, examples[i].src.size());
    b.tgt_len = std::max(b.tgt_len, examples[i].tgt.size() - 1);
  }
  b.src.assign(b.batch * b.src_len, kPad);
  b.tgt_in.assign(b.batch * b.tgt_len, kPad);
  b.tgt_out.assign(b.batch * b.tgt_len, kPad);
  b.tgt_mask.assign(b.batch * b.tgt_len, 0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& ex = examples[indices[r]];
    std::copy(ex.src.begin(), ex.src.end(), b.src.begin() + static_cast<std::ptrdiff_t>(r * b.src_len));
    for (std::size_t t = 0; t + 1 < ex.tgt.size(); ++t) {
      b.tgt_in[r * b.tgt_len + t] = ex.tgt[t];
      b.tgt_out[r * b.tgt_len + t] = ex.tgt[t + 1];
      b.tgt_mask[r * b.tgt_len + t] = 1;
    }
  }
  return b;
}

inline std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + epoch + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Example order for one epoch. With temperature 1 this is a seeded
/// permutation; otherwise languages are drawn with probability proportional
/// to size^(1/temperature) and examples uniformly within the language.
inline std::vector<std::size_t> epoch_order(const std::vector<EncodedExample>& examples, std::uint64_t seed, std::uint64_t epoch,
                                            double temperature = 1.0) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::uint64_t s = epoch_seed(seed, epoch);
  if (temperature == 1.0) {
    deterministic_shuffle(order, s);
    return order;
  }
  std::map<LanguageId, std::vector<std::size_t>> by_lang;
  for (std::size_t i = 0; i < examples.size(); ++i) by_lang[examples[i].lang].push_back(i);
  std::vector<double> cumulative;
  std::vector<const std::vector<std::size_t>*> pools;
  double total = 0.0;
  for (const auto& [lang, idx] : by_lang) {
    total += std::pow(static_cast<double>(idx.size()), 1.0 / temperature);
    cumulative.push_back(total);
    pools.push_back(&idx);
  }
  std::mt19937_64 rng(s);
  for (auto& slot : order) {
    const double u = ops::uniform01(rng) * total;
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const auto& pool = *pools[std::min(k, pools.size() - 1)];
    slot = pool[bounded_draw(rng, pool.size())];
  }
  return order;
}

/// All batches of one epoch, in order; the last batch may be short.
inline std::vector<SeqBatch> make_batches(const std::vector<EncodedExample>& examples, std::size_t batch_size, std::uint64_t seed,
                                          std::uint64_t epoch, double temperature = 1.0) {
  if (examples.empty()) throw Error(ErrorCode::EmptyCorpus, "no examples to batch");
  const auto order = epoch_order(examples, seed, epoch, temperature);
  std::vector<SeqBatch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.push_back(collate(examples, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                             order.begin() + static_cast<std::ptrdiff_t>(end))));
  }
  return out;
}

inline std::vector<SeqBatch> make_batches(const std::vector<WordEntry>& entries, const VocabPair& vocab, const ModelConfig& cfg,
                                          std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch, double temperature = 1.0) {
  return make_batches(encode_examples(entries, vocab, cfg), batch_size, seed, epoch, temperature);
}

/// Endless batch source cycling through seeded epochs.
class BatchStream {
 public:
  BatchStream(std::vector<EncodedExample> examples, std::size_t batch_size, std::uint64_t seed, double temperature = 1.0)
      : examples_(std::move(examples)), batch_size_(batch_size), seed_(seed), temperature_(temperature) {
    if (examples_.empty()) throw Error(ErrorCode::EmptyCorpus, "no training examples");
  }

  SeqBatch next() {
    if (cursor_ >= order_.size()) {
      order_ = epoch_order(examples_, seed_, epoch_++, temperature_);
      cursor_ = 0;
    }
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_), order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return collate(examples_, idx);
  }

  std::uint64_t epoch() const noexcept { return epoch_; }

 private:
  std::vector<EncodedExample> examples_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  double temperature_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

/// Masked mean NLL of a batch under teacher forcing.
template <typename T>
Var<T> batch_loss(Tape<T>& tape, const Model<T>& model, const SeqBatch& batch, const ForwardContext& ctx = {}) {
  auto logits = model.forward(tape, batch, ctx);
  return ops::cross_entropy_masked(tape, logits, batch.tgt_out, batch.tgt_mask);
}

/// Forward, backward, clip, AdamW. The learning rate is lr_at_step of the
/// update index (1-based) unless `lr_override` is set.
template <typename T>
double train_step(const Model<T>& model, const SeqBatch& batch, OptimizerState<T>& opt, const TrainConfig& cfg, std::mt19937_64& rng,
                  std::optional<double> lr_override = std::nullopt) {
  Tape<T> tape;
  ForwardContext ctx{model.config().dropout, &rng};
  auto loss = batch_loss(tape, model, batch, ctx);
  const double value = static_cast<double>(loss->value.item());
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteLoss, "loss is " + std::to_string(value) + " at update " + std::to_string(opt.step + 1));
  model.zero_grad();
  tape.backward(loss);
  const double lr = lr_override.value_or(lr_at_step(std::min<std::size_t>(opt.step + 1, cfg.total_steps), cfg));
  apply_gradients(model, opt, lr, cfg);
  return value;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainingOptions {
  std::optional<std::filesystem::path> checkpoint_path;  ///< best-val checkpoint
  std::optional<std::filesystem::path> metrics_path;     ///< JSON lines, appended
  nlohmann::json manifest_extra = nlohmann::json::object();
  std::uint64_t init_seed = 1;
  std::size_t eval_threads = 1;
  std::function<void(const nlohmann::json&)> on_record;
};

template <typename T>
struct TrainResult {
  Model<T> best_model;
  double best_mean_val_per = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  std::vector<nlohmann::json> records;
};

/// Trains for cfg.total_steps updates. Every val_every steps (and at the
/// end) the validation split is decoded greedily; the parameters with the
/// lowest mean val PER are kept and, if requested, written as a checkpoint.
template <typename T = float>
TrainResult<T> run_training(const CorpusSplit& split, const VocabPair& vocab, const TrainConfig& cfg, const ModelConfig& model_cfg,
                            const TrainingOptions& options = {}) {
  cfg.validate();
  Model<T> model = init_model<T>(model_cfg, options.init_seed);
  OptimizerState<T> opt = OptimizerState<T>::for_model(model);
  BatchStream stream(encode_examples(split.all_train(), vocab, model_cfg), cfg.batch_size, cfg.seed, cfg.lang_temperature);
  const auto val = split.all_val();
  std::mt19937_64 dropout_rng(epoch_seed(cfg.seed, 0xD0D0));
  const std::string vhash = vocab_hash(vocab);

  std::ofstream metrics;
  if (options.metrics_path) {
    if (options.metrics_path->has_parent_path()) std::filesystem::create_directories(options.metrics_path->parent_path());
    metrics.open(*options.metrics_path, std::ios::app);
    if (!metrics) throw Error(ErrorCode::Io, "cannot open metrics log " + options.metrics_path->string());
  }

  TrainResult<T> result;
  std::vector<Tensor<T>> best_params;
  auto emit = [&](const nlohmann::json& rec) {
    result.records.push_back(rec);
    if (metrics.is_open()) metrics << rec.dump() << '\n' << std::flush;
    if (options.on_record) options.on_record(rec);
  };

  for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
    const SeqBatch batch = stream.next();
    const double lr = lr_at_step(step, cfg);
    const double loss = train_step(model, batch, opt, cfg, dropout_rng, lr);
    const bool validate = step % cfg.val_every == 0 || step == cfg.total_steps;
    if (step % cfg.log_every != 0 && !validate) continue;
    nlohmann::json rec = {{"step", step}, {"train_loss", loss}, {"lr", lr}};
    if (validate && !val.empty()) {
      const auto report = evaluate(model_predictor(model, vocab), val, options.eval_threads);
      nlohmann::json per_lang = nlohmann::json::object();
      for (const auto& r : report.languages) per_lang[std::string(code_of(r.lang))] = r.per;
      rec["val_per"] = per_lang;
      rec["mean_val_per"] = report.mean_per;
      if (report.mean_per < result.best_mean_val_per) {
        result.best_mean_val_per = report.mean_per;
        result.best_step = step;
        best_params.clear();
        for (const auto& p : model.parameters()) best_params.push_back(p->value);
        if (options.checkpoint_path) {
          nlohmann::json extra = options.manifest_extra;
          extra["train_config"] = cfg;
          extra["best_step"] = step;
          extra["best_mean_val_per"] = report.mean_per;
          save_checkpoint(model, vhash, *options.checkpoint_path, extra);
        }
      }
    }
    emit(rec);
  }

  if (best_params.empty()) {
    for (const auto& p : model.parameters()) best_params.push_back(p->value);
    result.best_step = cfg.total_steps;
    if (options.checkpoint_path) {
      nlohmann::json extra = options.manifest_extra;
      extra["train_config"] = cfg;
      save_checkpoint(model, vhash, *options.checkpoint_path, extra);
    }
  }
  result.best_model = Model<T>::allocate(model_cfg);
  const auto params = result.best_model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  return result;
}

}  // namespace latg2p
