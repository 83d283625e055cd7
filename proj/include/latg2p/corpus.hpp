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

// ipa-dict ingestion: line parsing, IPA tokenization, deduplication and the
// deterministic 500/500 holdout split.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "latg2p/error.hpp"
#include "latg2p/language.hpp"
#include "latg2p/log.hpp"
#include "latg2p/unicode.hpp"

namespace latg2p {

enum class MultiPronRule { First, All };

inline constexpr char32_t kPrimaryStress = U'ˈ';
inline constexpr char32_t kSecondaryStress = U'ˌ';
inline constexpr char32_t kLengthMark = U'ː';
inline constexpr char32_t kHalfLengthMark = U'ˑ';
inline constexpr char32_t kTieBarAbove = U'͡';
inline constexpr char32_t kTieBarBelow = U'͜';

/// Combining marks that survive cleaning when no explicit allowlist is given.
inline std::set<char32_t> default_diacritic_allowlist() {
  return {
      U'̃',  // nasalization
      U'͡',  // tie bar above
      U'͜',  // tie bar below
      U'̩',  // syllabic
      U'̯',  // non-syllabic
      U'̥',  // voiceless
      U'̪',  // dental
      U'̆',  // extra short
  };
}

struct NormalizationPolicy {
  bool keep_stress = true;
  std::set<char32_t> diacritic_allowlist = default_diacritic_allowlist();
  MultiPronRule multi_pron_rule = MultiPronRule::First;

  bool operator==(const NormalizationPolicy&) const = default;
};

inline std::string to_string(MultiPronRule rule) { return rule == MultiPronRule::First ? "first" : "all"; }

inline MultiPronRule parse_multi_pron_rule(std::string_view text) {
  if (text == "first") return MultiPronRule::First;
  if (text == "all") return MultiPronRule::All;
  throw Error(ErrorCode::InvalidConfig, "multi_pron_rule must be 'first' or 'all', got '" + std::string(text) + "'");
}

/// Single-line `key=value` rendering used in manifest headers.
inline std::string describe(const NormalizationPolicy& policy) {
  std::ostringstream out;
  out << "keep_stress=" << (policy.keep_stress ? "true" : "false")
      << " multi_pron_rule=" << to_string(policy.multi_pron_rule) << " diacritic_allowlist=";
  bool first = true;
  for (char32_t cp : policy.diacritic_allowlist) {
    if (!first) out << ',';
    first = false;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "U+%04X", static_cast<unsigned>(cp));
    out << buf;
  }
  return out.str();
}

inline std::set<char32_t> parse_allowlist(std::string_view text) {
  std::set<char32_t> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if (item.rfind("U+", 0) != 0) throw Error(ErrorCode::InvalidConfig, "bad allowlist entry '" + item + "'");
    out.insert(static_cast<char32_t>(std::stoul(item.substr(2), nullptr, 16)));
  }
  return out;
}

struct WordEntry {
  std::string word;
  std::vector<std::string> phonemes;
  LanguageId lang = LanguageId::en;

  bool operator==(const WordEntry&) const = default;
};

inline std::string join_phonemes(const std::vector<std::string>& tokens, std::string_view sep = "") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != 0) out += sep;
    out += tokens[i];
  }
  return out;
}

struct TokenizeStats {
  std::size_t dropped = 0;
};

namespace detail {

inline bool is_stress(char32_t cp) { return cp == kPrimaryStress || cp == kSecondaryStress; }

inline bool ends_with_tie(const std::string& token) {
  const auto cps = unicode::decode(token);
  return !cps.empty() && (cps.back() == kTieBarAbove || cps.back() == kTieBarBelow);
}

inline bool is_length_token(const std::string& token) {
  const auto cps = unicode::decode(token);
  return cps.size() == 1 && (cps[0] == kLengthMark || cps[0] == kHalfLengthMark);
}

inline bool is_stress_token(const std::string& token) {
  const auto cps = unicode::decode(token);
  return cps.size() == 1 && is_stress(cps[0]);
}

}  // namespace detail

/// Splits a pronunciation (the text between the slashes) into phoneme tokens.
///
/// Tokens start as extended grapheme clusters of the NFC text, so a base plus
/// its combining marks (nasalized vowels, for instance) is already one token.
/// Afterwards a tie-barred cluster absorbs the following token (t͡ʃ) and a
/// length mark attaches to the preceding symbol (aː). Stress marks stay as
/// standalone tokens unless the policy drops them. Whitespace, punctuation and
/// combining marks outside the allowlist are removed and counted in `stats`.
///
/// Concatenating the result reproduces the cleaned pronunciation text.
inline std::vector<std::string> tokenize_ipa(std::string_view pron, const NormalizationPolicy& policy,
                                             TokenizeStats* stats = nullptr) {
  std::size_t dropped = 0;
  std::vector<std::string> clusters;
  for (const std::string& cluster : unicode::grapheme_clusters(unicode::nfc(pron))) {
    std::vector<char32_t> kept;
    for (char32_t cp : unicode::decode(cluster)) {
      bool keep = true;
      if (unicode::is_combining_mark(cp)) {
        keep = policy.diacritic_allowlist.contains(cp);
      } else if (detail::is_stress(cp)) {
        keep = policy.keep_stress;
      } else if (unicode::is_whitespace(cp) || unicode::is_punctuation(cp)) {
        keep = false;
      }
      if (keep) {
        kept.push_back(cp);
      } else {
        ++dropped;
      }
    }
    if (kept.empty()) continue;
    std::string text = unicode::encode(kept);
    if (unicode::is_combining_mark(kept.front())) {
      // The base was removed; keep the surviving marks on the previous symbol.
      if (clusters.empty()) {
        dropped += kept.size();
      } else {
        clusters.back() += text;
      }
      continue;
    }
    clusters.push_back(std::move(text));
  }

  std::vector<std::string> tokens;
  tokens.reserve(clusters.size());
  for (std::string& cluster : clusters) {
    if (!tokens.empty() && detail::ends_with_tie(tokens.back())) {
      tokens.back() += cluster;
    } else if (!tokens.empty() && detail::is_length_token(cluster) && !detail::is_stress_token(tokens.back())) {
      tokens.back() += cluster;
    } else {
      tokens.push_back(std::move(cluster));
    }
  }

  if (stats != nullptr) stats->dropped += dropped;
  if (dropped > 0) log_info("tokenize_ipa dropped " + std::to_string(dropped) + " code point(s) from /" + std::string(pron) + "/");
  if (tokens.empty()) {
    throw Error(ErrorCode::EmptyAfterNormalization, "pronunciation '" + std::string(pron) + "' is empty after cleaning");
  }
  return tokens;
}

/// Parses one ipa-dict record `word<TAB>/pron/(, /pron/)*`.
///
/// Returns an empty vector for blank and `#` comment lines. Under
/// MultiPronRule::First at most one entry is returned.
inline std::vector<WordEntry> parse_ipadict_line(std::string_view line, LanguageId lang,
                                                 const NormalizationPolicy& policy, TokenizeStats* stats = nullptr) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  if (line.empty() || line.front() == '#') return {};
  if (line.find_first_not_of(" \t") == std::string_view::npos) return {};

  const auto tab = line.find('\t');
  if (tab == std::string_view::npos) throw Error(ErrorCode::MalformedLine, "no tab separator in '" + std::string(line) + "'");
  std::string word = unicode::nfc(unicode::to_lower(line.substr(0, tab)));
  while (!word.empty() && word.back() == ' ') word.pop_back();
  if (word.empty()) throw Error(ErrorCode::MalformedLine, "empty word in '" + std::string(line) + "'");

  std::vector<WordEntry> out;
  std::string_view rest = line.substr(tab + 1);
  while (true) {
    const auto start = rest.find_first_not_of(" ");
    if (start == std::string_view::npos) break;
    rest.remove_prefix(start);
    if (rest.front() != '/') throw Error(ErrorCode::MalformedLine, "pronunciation not delimited by slashes in '" + std::string(line) + "'");
    const auto close = rest.find('/', 1);
    if (close == std::string_view::npos) throw Error(ErrorCode::MalformedLine, "unterminated pronunciation in '" + std::string(line) + "'");
    out.push_back(WordEntry{word, tokenize_ipa(rest.substr(1, close - 1), policy, stats), lang});
    if (policy.multi_pron_rule == MultiPronRule::First) return out;
    rest.remove_prefix(close + 1);
    const auto comma = rest.find_first_not_of(" ");
    if (comma == std::string_view::npos) break;
    if (rest[comma] != ',') throw Error(ErrorCode::MalformedLine, "expected ', ' between pronunciations in '" + std::string(line) + "'");
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) throw Error(ErrorCode::MalformedLine, "no pronunciation in '" + std::string(line) + "'");
  return out;
}

struct FileLoadSummary {
  std::size_t lines = 0;
  std::size_t entries = 0;
  std::size_t skipped_malformed = 0;
  std::size_t dropped_code_points = 0;
};

/// Reads a whole ipa-dict file. Malformed records are skipped and counted
/// rather than aborting the load; missing files raise Io.
inline std::vector<WordEntry> load_ipadict_file(const std::filesystem::path& path, LanguageId lang,
                                                const NormalizationPolicy& policy, FileLoadSummary* summary = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  FileLoadSummary local;
  TokenizeStats stats;
  std::vector<WordEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    ++local.lines;
    try {
      for (auto& entry : parse_ipadict_line(line, lang, policy, &stats)) out.push_back(std::move(entry));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedLine && e.code() != ErrorCode::EmptyAfterNormalization) throw;
      ++local.skipped_malformed;
    }
  }
  local.entries = out.size();
  local.dropped_code_points = stats.dropped;
  if (local.skipped_malformed > 0) {
    log_warn(path.string() + ": skipped " + std::to_string(local.skipped_malformed) + " malformed line(s)");
  }
  if (stats.dropped > 0) {
    log_info(path.string() + ": dropped " + std::to_string(stats.dropped) + " unsupported code point(s)");
  }
  if (summary != nullptr) *summary = local;
  return out;
}

/// Removes case-folded duplicate words, keeping the first occurrence. Under
/// MultiPronRule::All distinct pronunciations of one word are all kept.
inline std::vector<WordEntry> deduplicate(const std::vector<WordEntry>& entries, MultiPronRule rule = MultiPronRule::First) {
  std::unordered_set<std::string> seen;
  std::vector<WordEntry> out;
  for (const auto& entry : entries) {
    std::string key = unicode::case_fold(entry.word);
    if (rule == MultiPronRule::All) key += '\t' + join_phonemes(entry.phonemes, " ");
    if (seen.insert(std::move(key)).second) out.push_back(entry);
  }
  return out;
}

inline constexpr std::size_t kHoldoutSize = 500;
inline constexpr std::size_t kMinUniqueWords = 2 * kHoldoutSize + 100;

struct LanguageSplit {
  std::vector<WordEntry> train;
  std::vector<WordEntry> val;
  std::vector<WordEntry> test;

  bool operator==(const LanguageSplit&) const = default;
};

struct CorpusSplit {
  std::map<LanguageId, LanguageSplit> languages;
  std::uint64_t split_seed = 0;
  NormalizationPolicy policy;

  bool operator==(const CorpusSplit&) const = default;

  std::vector<WordEntry> all_train() const {
    std::vector<WordEntry> out;
    for (const auto& [lang, s] : languages) out.insert(out.end(), s.train.begin(), s.train.end());
    return out;
  }
  std::vector<WordEntry> all_val() const {
    std::vector<WordEntry> out;
    for (const auto& [lang, s] : languages) out.insert(out.end(), s.val.begin(), s.val.end());
    return out;
  }
  std::vector<WordEntry> all_test() const {
    std::vector<WordEntry> out;
    for (const auto& [lang, s] : languages) out.insert(out.end(), s.test.begin(), s.test.end());
    return out;
  }
};

/// Unbiased draw in [0, bound) from a 64-bit engine. std::uniform_int_distribution
/// is implementation-defined, which would make splits differ across toolchains.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

template <typename Item>
void deterministic_shuffle(std::vector<Item>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[bounded_draw(rng, i)]);
  }
}

/// Deduplicates each language, shuffles its unique words with a generator
/// seeded only by `seed`, and cuts test (first 500), val (next 500) and
/// train (rest). Identical word lists therefore receive identical cuts in
/// every language. All entries of one word land in the same partition.
inline CorpusSplit split_corpus(const std::map<LanguageId, std::vector<WordEntry>>& entries, std::uint64_t seed,
                                const NormalizationPolicy& policy = {}) {
  CorpusSplit split;
  split.split_seed = seed;
  split.policy = policy;
  for (const auto& [lang, list] : entries) {
    const auto unique = deduplicate(list, policy.multi_pron_rule);
    std::vector<std::string> words;
    std::map<std::string, std::vector<const WordEntry*>> by_word;
    for (const auto& entry : unique) {
      auto& bucket = by_word[entry.word];
      if (bucket.empty()) words.push_back(entry.word);
      bucket.push_back(&entry);
    }
    if (words.size() < kMinUniqueWords) {
      throw Error(ErrorCode::InsufficientData, std::string(code_of(lang)) + " has " + std::to_string(words.size()) +
                                                   " unique words, need at least " + std::to_string(kMinUniqueWords));
    }
    deterministic_shuffle(words, seed);
    LanguageSplit out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      auto& target = i < kHoldoutSize ? out.test : (i < 2 * kHoldoutSize ? out.val : out.train);
      for (const WordEntry* entry : by_word[words[i]]) target.push_back(*entry);
    }
    split.languages.emplace(lang, std::move(out));
  }
  return split;
}

struct CorpusStatsRow {
  LanguageId lang = LanguageId::en;
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  bool operator==(const CorpusStatsRow&) const = default;
};

inline std::vector<CorpusStatsRow> corpus_stats(const CorpusSplit& split) {
  std::vector<CorpusStatsRow> rows;
  for (const auto& [lang, s] : split.languages) rows.push_back({lang, s.train.size(), s.val.size(), s.test.size()});
  return rows;
}

namespace detail {

inline std::string thousands(std::size_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

}  // namespace detail

/// Table-1 style text: one row per language with train/val/test pair counts.
inline std::string format_stats_table(const std::vector<CorpusStatsRow>& rows) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-6s %10s %8s %8s\n", "Lang", "Train", "Val.", "Test");
  out << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%-6s %10s %8s %8s\n", std::string(code_of(row.lang)).c_str(),
                  detail::thousands(row.train).c_str(), detail::thousands(row.val).c_str(),
                  detail::thousands(row.test).c_str());
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Split manifest: `lang<TAB>split<TAB>word<TAB>space-joined-phonemes`
// ---------------------------------------------------------------------------

inline constexpr std::string_view kManifestHeader = "# latg2p split manifest";

inline std::string manifest_text(const CorpusSplit& split) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  out << "# split_seed=" << split.split_seed << '\n';
  out << "# policy " << describe(split.policy) << '\n';
  auto emit = [&](LanguageId lang, std::string_view name, const std::vector<WordEntry>& list) {
    for (const auto& e : list) out << code_of(lang) << '\t' << name << '\t' << e.word << '\t' << join_phonemes(e.phonemes, " ") << '\n';
  };
  for (const auto& [lang, s] : split.languages) {
    emit(lang, "train", s.train);
    emit(lang, "val", s.val);
    emit(lang, "test", s.test);
  }
  return out.str();
}

inline CorpusSplit parse_manifest(std::istream& in) {
  CorpusSplit split;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("# split_seed=", 0) == 0) {
        split.split_seed = std::stoull(line.substr(13));
      } else if (line.rfind("# policy ", 0) == 0) {
        std::istringstream fields(line.substr(9));
        std::string kv;
        while (fields >> kv) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) continue;
          const std::string key = kv.substr(0, eq);
          const std::string value = kv.substr(eq + 1);
          if (key == "keep_stress") split.policy.keep_stress = value == "true";
          if (key == "multi_pron_rule") split.policy.multi_pron_rule = parse_multi_pron_rule(value);
          if (key == "diacritic_allowlist") split.policy.diacritic_allowlist = parse_allowlist(value);
        }
      }
      continue;
    }
    std::array<std::string, 4> cols;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto next = c < 3 ? line.find('\t', pos) : std::string::npos;
      if (c < 3 && next == std::string::npos) {
        throw Error(ErrorCode::MalformedLine, "manifest line " + std::to_string(lineno) + " has fewer than 4 columns");
      }
      cols[c] = line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      pos = next + 1;
    }
    WordEntry entry;
    entry.lang = parse_language(cols[0]);
    entry.word = cols[2];
    std::istringstream toks(cols[3]);
    for (std::string t; toks >> t;) entry.phonemes.push_back(t);
    auto& s = split.languages[entry.lang];
    if (cols[1] == "train") {
      s.train.push_back(std::move(entry));
    } else if (cols[1] == "val") {
      s.val.push_back(std::move(entry));
    } else if (cols[1] == "test") {
      s.test.push_back(std::move(entry));
    } else {
      throw Error(ErrorCode::MalformedLine, "manifest line " + std::to_string(lineno) + " has unknown split '" + cols[1] + "'");
    }
  }
  return split;
}

inline CorpusSplit read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  return parse_manifest(in);
}

}  // namespace latg2p
