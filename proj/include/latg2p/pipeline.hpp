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

// File-level plumbing shared by the command-line tool and the test suites:
// locating ipa-dict files, producing and reloading a prepared work
// directory, and loading checkpoints against it.

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "latg2p/checkpoint.hpp"
#include "latg2p/config.hpp"
#include "latg2p/corpus.hpp"
#include "latg2p/io.hpp"
#include "latg2p/report.hpp"
#include "latg2p/vocab.hpp"

namespace latg2p {

/// Artifact names inside a prepared work directory.
struct WorkDir {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "split_manifest.tsv"; }
  std::filesystem::path vocab() const { return root / "vocab.tsv"; }
  std::filesystem::path stats_text() const { return root / "stats.txt"; }
  std::filesystem::path stats_json() const { return root / "stats.json"; }
  std::filesystem::path run_config() const { return root / "run_config.txt"; }
};

/// `<code>.txt`, else the lexicographically first `<code>_*.txt` (the
/// upstream naming, e.g. `es_ES.txt`).
inline std::filesystem::path locate_language_file(const std::filesystem::path& dir, LanguageId lang) {
  const std::string code(code_of(lang));
  const auto exact = dir / (code + ".txt");
  if (std::filesystem::is_regular_file(exact)) return exact;
  std::vector<std::filesystem::path> candidates;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& item : std::filesystem::directory_iterator(dir)) {
      const std::string name = item.path().filename().string();
      if (item.is_regular_file() && name.rfind(code + "_", 0) == 0 && item.path().extension() == ".txt") candidates.push_back(item.path());
    }
  }
  if (candidates.empty()) throw Error(ErrorCode::Io, "missing language file " + exact.string());
  std::sort(candidates.begin(), candidates.end());
  return candidates.front();
}

inline std::map<LanguageId, std::vector<WordEntry>> load_corpus_dir(const std::filesystem::path& dir, const std::vector<LanguageId>& langs,
                                                                    const NormalizationPolicy& policy) {
  std::map<LanguageId, std::vector<WordEntry>> out;
  for (LanguageId lang : langs) out[lang] = load_ipadict_file(locate_language_file(dir, lang), lang, policy);
  return out;
}

struct PreparedCorpus {
  CorpusSplit split;
  VocabPair vocab;
};

inline PreparedCorpus prepare_corpus(const std::filesystem::path& data_dir, const std::vector<LanguageId>& langs, std::uint64_t seed,
                                     const NormalizationPolicy& policy) {
  PreparedCorpus out;
  out.split = split_corpus(load_corpus_dir(data_dir, langs, policy), seed, policy);
  out.vocab = build_vocabs(out.split.all_train());
  return out;
}

/// Writes manifest, vocab, stats and the run config. Each file is written
/// atomically.
inline void write_prepared(const PreparedCorpus& prepared, const RunConfig& cfg, const WorkDir& dir) {
  std::filesystem::create_directories(dir.root);
  const auto rows = corpus_stats(prepared.split);
  write_file_atomic(dir.manifest(), manifest_text(prepared.split));
  save_vocab(prepared.vocab, dir.vocab());
  write_file_atomic(dir.stats_text(), format_stats_table(rows));
  write_file_atomic(dir.stats_json(), stats_json(rows, prepared.split).dump(2) + "\n");
  write_file_atomic(dir.run_config(), run_config_text(cfg));
}

inline PreparedCorpus load_prepared(const WorkDir& dir) {
  PreparedCorpus out;
  out.split = read_manifest(dir.manifest());
  out.vocab = load_vocab(dir.vocab());
  return out;
}

/// Identity of a checkpoint file: FNV-1a of its bytes.
inline std::string file_hash(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

/// Scores a checkpoint on one split and fills the report's provenance
/// fields.
inline EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const PreparedCorpus& prepared, const std::string& split_name,
                                      std::size_t threads) {
  const auto loaded = load_checkpoint<float>(checkpoint, vocab_hash(prepared.vocab));
  std::vector<WordEntry> entries;
  if (split_name == "test") entries = prepared.split.all_test();
  else if (split_name == "val") entries = prepared.split.all_val();
  else throw Error(ErrorCode::InvalidConfig, "split must be test or val, got '" + split_name + "'");
  EvalReport report = evaluate_model(loaded.model, prepared.vocab, entries, threads);
  report.split = split_name;
  report.system = loaded.model.config().use_lang_id ? "latg2p" : "latg2p-no-langid";
  report.checkpoint_hash = file_hash(checkpoint);
  report.param_count = count_params(loaded.model).total;
  report.checkpoint_bytes = static_cast<std::size_t>(std::filesystem::file_size(checkpoint));
  report.config = loaded.manifest.at("config");
  return report;
}

}  // namespace latg2p
