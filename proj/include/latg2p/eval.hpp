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

// Greedy decoding and the evaluation harness: per-language PER with Wilson
// intervals, ablation deltas with z-tests, batch-1 throughput, and
// parameter/PER/footprint plot data.

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "latg2p/corpus.hpp"
#include "latg2p/inference.hpp"
#include "latg2p/language.hpp"
#include "latg2p/metrics.hpp"
#include "latg2p/model.hpp"
#include "latg2p/unicode.hpp"
#include "latg2p/vocab.hpp"

namespace latg2p {

/// Default decode budget for a word of `chars` characters.
inline std::size_t default_decode_limit(std::size_t chars) { return 2 * chars + 10; }

/// Greedy autoregressive decoding: feeds BOS, then repeatedly appends the
/// argmax token (lowest id on ties) until EOS or `max_len` tokens. Sources
/// longer than the model's max_len are truncated.
template <typename T>
std::vector<std::string> greedy_decode(const Model<T>& model, std::string_view word, LanguageId lang, const VocabPair& vocab,
                                       std::optional<std::size_t> max_len = std::nullopt) {
  const ModelConfig& cfg = model.config();
  auto src = model_source_ids(cfg, word, lang, vocab);
  if (src.size() > cfg.max_len) src.resize(cfg.max_len);
  const std::size_t limit = std::min(max_len.value_or(default_decode_limit(unicode::length(word))), cfg.max_len - 1);
  std::vector<int> out;
  if (limit == 0) return {};
  DecodeSession<T> session(model, src);
  int token = kBos;
  for (std::size_t i = 0; i < limit; ++i) {
    const auto logits = session.step(token);
    int best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j) {
      if (logits[j] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
    }
    if (best == kEos) break;
    out.push_back(best);
    token = best;
  }
  return decode_phonemes(out, vocab);
}

/// Anything that maps (word, language) to phonemes: a model, a lookup table.
using Predictor = std::function<std::vector<std::string>(const std::string&, LanguageId)>;

template <typename T>
Predictor model_predictor(const Model<T>& model, const VocabPair& vocab) {
  return [&model, &vocab](const std::string& word, LanguageId lang) { return greedy_decode(model, word, lang, vocab); };
}

struct LanguageResult {
  LanguageId lang = LanguageId::en;
  std::size_t n_words = 0;
  std::size_t n_ref = 0;
  std::size_t n_errors = 0;
  double per = 0.0;    ///< percent
  double ci_lo = 0.0;  ///< percent
  double ci_hi = 0.0;  ///< percent
};

struct EvalReport {
  std::string system = "latg2p";
  std::string split = "test";
  std::vector<LanguageResult> languages;
  double mean_per = 0.0;  ///< unweighted mean over languages, percent
  std::string checkpoint_hash;
  std::size_t param_count = 0;
  std::size_t checkpoint_bytes = 0;
  nlohmann::json config = nlohmann::json::object();

  const LanguageResult* find(LanguageId lang) const {
    for (const auto& r : languages) {
      if (r.lang == lang) return &r;
    }
    return nullptr;
  }
};

inline LanguageResult make_language_result(LanguageId lang, std::size_t n_words, std::size_t n_errors, std::size_t n_ref) {
  LanguageResult r;
  r.lang = lang;
  r.n_words = n_words;
  r.n_errors = n_errors;
  r.n_ref = n_ref;
  r.per = 100.0 * static_cast<double>(n_errors) / static_cast<double>(n_ref);
  const auto ci = wilson_ci(n_errors, n_ref);
  r.ci_lo = 100.0 * ci.lo;
  r.ci_hi = 100.0 * ci.hi;
  return r;
}

inline void finalize_mean(EvalReport& report) {
  double total = 0.0;
  for (const auto& r : report.languages) total += r.per;
  report.mean_per = report.languages.empty() ? 0.0 : total / static_cast<double>(report.languages.size());
}

/// Decodes every entry and scores it per language. `threads` > 1 splits the
/// words across workers; the per-word results, and so the report, do not
/// depend on the thread count.
inline EvalReport evaluate(const Predictor& predict, const std::vector<WordEntry>& entries, std::size_t threads = 1) {
  std::vector<std::vector<std::string>> hyps(entries.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < entries.size(); i += step) hyps[i] = predict(entries[i].word, entries[i].lang);
  };
  threads = std::max<std::size_t>(1, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  std::map<LanguageId, std::vector<std::size_t>> by_lang;
  for (std::size_t i = 0; i < entries.size(); ++i) by_lang[entries[i].lang].push_back(i);
  EvalReport report;
  for (const auto& [lang, idx] : by_lang) {
    std::vector<std::vector<std::string>> h, r;
    for (std::size_t i : idx) {
      h.push_back(hyps[i]);
      r.push_back(entries[i].phonemes);
    }
    const auto score = per(h, r);
    report.languages.push_back(make_language_result(lang, idx.size(), score.n_errors, score.n_ref));
  }
  finalize_mean(report);
  return report;
}

template <typename T>
EvalReport evaluate_model(const Model<T>& model, const VocabPair& vocab, const std::vector<WordEntry>& entries, std::size_t threads = 1) {
  auto report = evaluate(model_predictor(model, vocab), entries, threads);
  report.param_count = count_params(model).total;
  report.config = model.config();
  return report;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationRow {
  LanguageId lang = LanguageId::en;
  double per_with = 0.0;
  double per_without = 0.0;
  double ci_half_without = 0.0;  ///< half-width of the no-id Wilson interval, percent
  double delta = 0.0;            ///< per_without - per_with, percentage points
  SignificanceResult test;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  double mean_with = 0.0;
  double mean_without = 0.0;
  double mean_delta = 0.0;
};

/// Per-language PER delta and one-sided z-test (H1: the with-id system makes
/// fewer errors). Both reports must cover the same languages and references.
inline AblationReport ablation_compare(const EvalReport& with_id, const EvalReport& without_id) {
  if (with_id.languages.size() != without_id.languages.size()) {
    throw Error(ErrorCode::SplitMismatch, "reports cover different language sets");
  }
  AblationReport out;
  for (std::size_t i = 0; i < with_id.languages.size(); ++i) {
    const auto& a = with_id.languages[i];
    const auto& b = without_id.languages[i];
    if (a.lang != b.lang || a.n_ref != b.n_ref || a.n_words != b.n_words) {
      throw Error(ErrorCode::SplitMismatch, "reports disagree on the " + std::string(code_of(a.lang)) + " test set");
    }
    AblationRow row;
    row.lang = a.lang;
    row.per_with = a.per;
    row.per_without = b.per;
    row.ci_half_without = 0.5 * (b.ci_hi - b.ci_lo);
    row.delta = b.per - a.per;
    row.test = two_prop_ztest(a.n_errors, a.n_ref, b.n_errors, b.n_ref, std::string(code_of(a.lang)));
    out.rows.push_back(row);
  }
  out.mean_with = with_id.mean_per;
  out.mean_without = without_id.mean_per;
  out.mean_delta = without_id.mean_per - with_id.mean_per;
  return out;
}

// ---------------------------------------------------------------------------
// Throughput
// ---------------------------------------------------------------------------

struct ThroughputReport {
  std::string device = "cpu";
  double words_per_sec = 0.0;
  double chars_per_sec = 0.0;
  std::size_t n_words = 0;
  std::size_t n_chars = 0;
  double wall_seconds = 0.0;
};

inline constexpr std::size_t kMinBenchWords = 100;

/// Times one-word-at-a-time prediction over `words` after `warmup_n`
/// untimed calls.
inline ThroughputReport throughput_bench(const Predictor& predict, LanguageId lang, const std::vector<std::string>& words,
                                         std::size_t warmup_n = 20, std::string device = "cpu") {
  if (words.size() < kMinBenchWords) {
    throw Error(ErrorCode::TooFewWords, "throughput needs at least " + std::to_string(kMinBenchWords) + " words, got " +
                                            std::to_string(words.size()));
  }
  for (std::size_t i = 0; i < warmup_n; ++i) predict(words[i % words.size()], lang);
  ThroughputReport r;
  r.device = std::move(device);
  const auto start = std::chrono::steady_clock::now();
  for (const auto& w : words) {
    predict(w, lang);
    r.n_chars += unicode::length(w);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.n_words = words.size();
  r.words_per_sec = static_cast<double>(r.n_words) / r.wall_seconds;
  r.chars_per_sec = static_cast<double>(r.n_chars) / r.wall_seconds;
  return r;
}

// ---------------------------------------------------------------------------
// Pareto plot data
// ---------------------------------------------------------------------------

struct ParetoPoint {
  std::string name;
  std::optional<double> params;
  double per = 0.0;
  std::optional<double> footprint_mb;
};

/// External reference points (not implemented here): the 580M-parameter
/// byte-level ByT5 model and per-language WFSTs, by mean PER.
inline std::vector<ParetoPoint> reference_pareto_points() {
  return {{"ByT5 (reference)", 5.8e8, 5.4, std::nullopt}, {"WFST (reference)", std::nullopt, 3.2, std::nullopt}};
}

inline constexpr double kBytesPerMB = 1e6;

/// CSV with header `name,params,per,footprint_mb`. Reference rows are
/// appended only when at least one system is given.
inline std::string pareto_plot_data(const std::vector<ParetoPoint>& systems) {
  std::ostringstream out;
  out << "name,params,per,footprint_mb\n";
  auto num = [](std::optional<double> v) {
    if (!v) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", *v);
    return std::string(buf);
  };
  auto emit = [&](const ParetoPoint& p) { out << p.name << ',' << num(p.params) << ',' << num(p.per) << ',' << num(p.footprint_mb) << '\n'; };
  for (const auto& p : systems) emit(p);
  if (!systems.empty()) {
    for (const auto& p : reference_pareto_points()) emit(p);
  }
  return out.str();
}

inline ParetoPoint pareto_point(const EvalReport& report) {
  return {report.system, static_cast<double>(report.param_count), report.mean_per,
          static_cast<double>(report.checkpoint_bytes) / kBytesPerMB};
}

}  // namespace latg2p
