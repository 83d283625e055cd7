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

// Grapheme and phoneme vocabularies. Source ids: specials 0..3, one token per
// language 4..9, then graphemes. Target ids: specials 0..3, then phonemes.

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "latg2p/corpus.hpp"
#include "latg2p/error.hpp"
#include "latg2p/io.hpp"
#include "latg2p/language.hpp"
#include "latg2p/log.hpp"
#include "latg2p/unicode.hpp"

namespace latg2p {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecials = 4;
inline constexpr int kFirstLangToken = kNumSpecials;
inline constexpr int kFirstGrapheme = kFirstLangToken + static_cast<int>(kNumLanguages);
inline constexpr int kFirstPhoneme = kNumSpecials;
inline constexpr std::size_t kPaperPhonemeInventory = 109;

inline constexpr std::array<std::string_view, kNumSpecials> kSpecialNames = {"<pad>", "<s>", "</s>", "<unk>"};

/// One direction of the mapping: symbols in id order and the reverse index.
class SymbolTable {
 public:
  SymbolTable() = default;
  SymbolTable(std::vector<std::string> symbols, int first_id) : symbols_(std::move(symbols)), first_id_(first_id) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (!index_.emplace(symbols_[i], first_id_ + static_cast<int>(i)).second) {
        throw Error(ErrorCode::InvalidConfig, "duplicate vocabulary symbol '" + symbols_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  int first_id() const noexcept { return first_id_; }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  std::optional<int> find(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id - first_id_)); }

  bool operator==(const SymbolTable& other) const { return symbols_ == other.symbols_ && first_id_ == other.first_id_; }

 private:
  std::vector<std::string> symbols_;
  int first_id_ = 0;
  std::unordered_map<std::string, int> index_;
};

struct EncodedPair {
  std::vector<int> src_ids;
  std::vector<int> tgt_ids;
};

class VocabPair {
 public:
  VocabPair() = default;
  VocabPair(std::vector<std::string> graphemes, std::vector<std::string> phonemes)
      : graphemes_(std::move(graphemes), kFirstGrapheme), phonemes_(std::move(phonemes), kFirstPhoneme) {}

  const SymbolTable& graphemes() const noexcept { return graphemes_; }
  const SymbolTable& phonemes() const noexcept { return phonemes_; }

  /// Rows needed by the source embedding (specials + language tokens + graphemes).
  std::size_t source_size() const noexcept { return static_cast<std::size_t>(kFirstGrapheme) + graphemes_.size(); }
  /// Rows of the output softmax (specials + phonemes).
  std::size_t target_size() const noexcept { return static_cast<std::size_t>(kFirstPhoneme) + phonemes_.size(); }

  static int lang_token(LanguageId lang) noexcept { return kFirstLangToken + static_cast<int>(index_of(lang)); }

  bool operator==(const VocabPair& other) const = default;

 private:
  SymbolTable graphemes_;
  SymbolTable phonemes_;
};

/// Builds both vocabularies from the training entries. Symbols are sorted by
/// code point so the result depends only on the multiset of entries.
inline VocabPair build_vocabs(const std::vector<WordEntry>& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build vocabularies from an empty training set");
  std::set<std::u32string> graphemes;
  std::set<std::u32string> phonemes;
  for (const auto& entry : train) {
    for (char32_t cp : unicode::decode(entry.word)) graphemes.insert(std::u32string(1, cp));
    for (const auto& p : entry.phonemes) {
      const auto cps = unicode::decode(p);
      phonemes.insert(std::u32string(cps.begin(), cps.end()));
    }
  }
  auto to_utf8 = [](const std::set<std::u32string>& in) {
    std::vector<std::string> out;
    for (const auto& s : in) out.push_back(unicode::encode(std::vector<char32_t>(s.begin(), s.end())));
    return out;
  };
  VocabPair vocab(to_utf8(graphemes), to_utf8(phonemes));
  if (vocab.phonemes().size() > kPaperPhonemeInventory) {
    log_warn("phoneme inventory has " + std::to_string(vocab.phonemes().size()) + " symbols, more than the expected " +
             std::to_string(kPaperPhonemeInventory));
  }
  log_info("vocab: " + std::to_string(vocab.graphemes().size()) + " graphemes, " +
           std::to_string(vocab.phonemes().size()) + " phonemes");
  return vocab;
}

/// Language token followed by one id per code point; unseen characters map to UNK.
inline std::vector<int> encode_source(std::string_view word, LanguageId lang, const VocabPair& vocab) {
  std::vector<int> ids;
  ids.push_back(VocabPair::lang_token(lang));
  for (char32_t cp : unicode::decode(word)) {
    ids.push_back(vocab.graphemes().find(unicode::encode(cp)).value_or(kUnk));
  }
  return ids;
}

inline std::vector<int> encode_target(const std::vector<std::string>& phonemes, const VocabPair& vocab) {
  std::vector<int> ids;
  ids.reserve(phonemes.size() + 2);
  ids.push_back(kBos);
  for (const auto& p : phonemes) {
    auto id = vocab.phonemes().find(p);
    if (!id) log_warn("phoneme '" + p + "' is not in the vocabulary, encoding as <unk>");
    ids.push_back(id.value_or(kUnk));
  }
  ids.push_back(kEos);
  return ids;
}

inline EncodedPair encode_pair(const WordEntry& entry, const VocabPair& vocab) {
  return {encode_source(entry.word, entry.lang, vocab), encode_target(entry.phonemes, vocab)};
}

/// Maps target ids back to phoneme symbols. BOS and PAD are skipped and
/// decoding stops at the first EOS.
inline std::vector<std::string> decode_phonemes(const std::vector<int>& ids, const VocabPair& vocab) {
  std::vector<std::string> out;
  const int limit = static_cast<int>(vocab.target_size());
  for (int id : ids) {
    if (id < 0 || id >= limit) {
      throw Error(ErrorCode::UnknownId, "target id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(limit));
    }
    if (id == kEos) break;
    if (id == kBos || id == kPad) continue;
    out.push_back(id == kUnk ? std::string(kSpecialNames[kUnk]) : vocab.phonemes().symbol(id));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocab file: one `id<TAB>symbol<TAB>kind` line per entry.
// ---------------------------------------------------------------------------

inline std::string vocab_text(const VocabPair& vocab) {
  std::ostringstream out;
  for (int i = 0; i < kNumSpecials; ++i) out << i << '\t' << kSpecialNames[i] << "\tspecial\n";
  for (LanguageId lang : kAllLanguages) out << VocabPair::lang_token(lang) << "\t<" << code_of(lang) << ">\tlang\n";
  const auto& g = vocab.graphemes();
  for (std::size_t i = 0; i < g.size(); ++i) out << g.first_id() + static_cast<int>(i) << '\t' << g.symbols()[i] << "\tgrapheme\n";
  const auto& p = vocab.phonemes();
  for (std::size_t i = 0; i < p.size(); ++i) out << p.first_id() + static_cast<int>(i) << '\t' << p.symbols()[i] << "\tphoneme\n";
  return out.str();
}

inline std::string vocab_hash(const VocabPair& vocab) { return hex64(fnv1a64(vocab_text(vocab))); }

inline VocabPair parse_vocab(std::string_view text) {
  std::vector<std::string> graphemes;
  std::vector<std::string> phonemes;
  int specials = 0;
  int langs = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw Error(ErrorCode::MalformedLine, "vocab line " + std::to_string(lineno) + " needs 3 columns");
    const int id = std::stoi(line.substr(0, t1));
    const std::string symbol = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string kind = line.substr(t2 + 1);
    int expected = -1;
    if (kind == "special") {
      expected = specials++;
    } else if (kind == "lang") {
      expected = kFirstLangToken + langs++;
    } else if (kind == "grapheme") {
      expected = kFirstGrapheme + static_cast<int>(graphemes.size());
      graphemes.push_back(symbol);
    } else if (kind == "phoneme") {
      expected = kFirstPhoneme + static_cast<int>(phonemes.size());
      phonemes.push_back(symbol);
    } else {
      throw Error(ErrorCode::MalformedLine, "vocab line " + std::to_string(lineno) + " has unknown kind '" + kind + "'");
    }
    if (id != expected) {
      throw Error(ErrorCode::MalformedLine, "vocab line " + std::to_string(lineno) + ": id " + std::to_string(id) +
                                                " does not match expected " + std::to_string(expected));
    }
  }
  if (specials != kNumSpecials || langs != static_cast<int>(kNumLanguages)) {
    throw Error(ErrorCode::MalformedLine, "vocab file is missing special or language entries");
  }
  return VocabPair(std::move(graphemes), std::move(phonemes));
}

inline void save_vocab(const VocabPair& vocab, const std::filesystem::path& path) { write_file_atomic(path, vocab_text(vocab)); }

inline VocabPair load_vocab(const std::filesystem::path& path) { return parse_vocab(read_file(path)); }

}  // namespace latg2p
