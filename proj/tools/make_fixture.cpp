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

// Generates the bundled synthetic corpus: six rule-based languages in
// ipa-dict format. Pronunciations are a pure function of spelling. The pt
// and ro files share one word list and map every grapheme into disjoint
// phoneme sets, so no source-only predictor can serve both.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latg2p/corpus.hpp"
#include "latg2p/io.hpp"
#include "latg2p/unicode.hpp"

namespace {

using latg2p::bounded_draw;
using Phones = std::vector<std::string>;
using Word = std::vector<char32_t>;

struct Rule {
  std::u32string pattern;
  Phones out;
  // Context test over (word, match start, match end).
  std::function<bool(const Word&, std::size_t, std::size_t)> when;
};

bool any_of(char32_t c, std::u32string_view set) { return set.find(c) != std::u32string_view::npos; }

auto next_in(std::u32string set) {
  return [set](const Word& w, std::size_t, std::size_t end) { return end < w.size() && any_of(w[end], set); };
}
auto prev_in(std::u32string set) {
  return [set](const Word& w, std::size_t start, std::size_t) { return start > 0 && any_of(w[start - 1], set); };
}
auto next_not_in(std::u32string set) {
  return [set](const Word& w, std::size_t, std::size_t end) { return end >= w.size() || !any_of(w[end], set); };
}
auto at_end_after(std::u32string set) {
  return [set](const Word& w, std::size_t start, std::size_t end) { return end == w.size() && start > 0 && !any_of(w[start - 1], set); };
}
auto at_end() {
  return [](const Word& w, std::size_t, std::size_t end) { return end == w.size(); };
}

struct SyntheticLanguage {
  std::string code;
  std::vector<std::string> onsets;
  std::vector<std::string> inner_onsets;  ///< extra onsets not allowed word-initially
  std::vector<std::string> nuclei;
  std::vector<std::string> codas;
  double coda_rate = 0.0;
  std::size_t min_syllables = 2;
  std::size_t max_syllables = 4;
  std::vector<Rule> rules;
  std::set<std::string> vowels;  ///< phonemes that count as syllable nuclei
  bool penultimate_stress = false;
  bool initial_stress = false;
  double variant_rate = 0.0;  ///< share of lines listing a second pronunciation
};

Phones transduce(const SyntheticLanguage& lang, const Word& w) {
  Phones out;
  std::size_t i = 0;
  while (i < w.size()) {
    bool matched = false;
    for (const auto& r : lang.rules) {
      const std::size_t end = i + r.pattern.size();
      if (end > w.size() || !std::equal(r.pattern.begin(), r.pattern.end(), w.begin() + static_cast<std::ptrdiff_t>(i))) continue;
      if (r.when && !r.when(w, i, end)) continue;
      out.insert(out.end(), r.out.begin(), r.out.end());
      i = end;
      matched = true;
      break;
    }
    if (!matched) {
      out.push_back(latg2p::unicode::encode(w[i]));
      ++i;
    }
  }
  std::vector<std::size_t> nuclei;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (lang.vowels.count(out[k]) && (k == 0 || !lang.vowels.count(out[k - 1]))) nuclei.push_back(k);
  }
  if (nuclei.size() >= 2) {
    if (lang.initial_stress) {
      out.insert(out.begin(), "ˈ");
    } else if (lang.penultimate_stress) {
      std::size_t at = nuclei[nuclei.size() - 2];
      if (at > 0 && !lang.vowels.count(out[at - 1])) --at;
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), "ˈ");
    }
  }
  return out;
}

std::string make_word(const SyntheticLanguage& lang, std::mt19937_64& rng) {
  const std::size_t n = lang.min_syllables + bounded_draw(rng, lang.max_syllables - lang.min_syllables + 1);
  std::string w;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t pool = lang.onsets.size() + (s > 0 ? lang.inner_onsets.size() : 0);
    const std::size_t k = bounded_draw(rng, pool);
    w += k < lang.onsets.size() ? lang.onsets[k] : lang.inner_onsets[k - lang.onsets.size()];
    w += lang.nuclei[bounded_draw(rng, lang.nuclei.size())];
    if (!lang.codas.empty() && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < lang.coda_rate) {
      w += lang.codas[bounded_draw(rng, lang.codas.size())];
    }
  }
  return w;
}

std::vector<std::string> word_list(const SyntheticLanguage& lang, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::string> seen;
  std::vector<std::string> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > count * 1000) throw std::runtime_error("cannot draw enough unique words for " + lang.code);
    std::string w = make_word(lang, rng);
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::vector<SyntheticLanguage> languages() {
  std::vector<SyntheticLanguage> out;

  SyntheticLanguage en;
  en.code = "en";
  en.onsets = {"b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "y", "z", "th", "sh", "ch"};
  en.nuclei = {"a", "e", "i", "o", "u", "ee", "oo"};
  en.codas = {"n", "t", "s", "d", "l", "m", "k"};
  en.coda_rate = 0.3;
  en.max_syllables = 3;
  en.rules = {{U"th", {"θ"}, {}},
              {U"sh", {"ʃ"}, {}},
              {U"ch", {"t͡ʃ"}, {}},
              {U"ee", {"iː"}, {}},
              {U"oo", {"uː"}, {}},
              {U"c", {"s"}, next_in(U"eiy")},
              {U"c", {"k"}, {}},
              {U"e", {}, at_end_after(U"aeiouy")},
              {U"a", {"æ"}, {}},
              {U"e", {"ɛ"}, {}},
              {U"i", {"ɪ"}, {}},
              {U"o", {"ɒ"}, {}},
              {U"u", {"ʌ"}, {}},
              {U"y", {"j"}, {}},
              {U"r", {"ɹ"}, {}},
              {U"g", {"ɡ"}, {}}};
  en.vowels = {"æ", "ɛ", "ɪ", "ɒ", "ʌ", "iː", "uː"};
  en.initial_stress = true;
  en.variant_rate = 0.05;
  out.push_back(en);

  SyntheticLanguage es;
  es.code = "es";
  es.onsets = {"b", "c", "d", "f", "g", "h", "j", "l", "ll", "m", "n", "ñ", "p", "r", "s", "t", "v", "y", "z", "ch"};
  es.inner_onsets = {"rr", "qu"};
  es.nuclei = {"a", "e", "i", "o", "u"};
  es.codas = {"n", "s", "l", "r"};
  es.coda_rate = 0.25;
  const std::u32string es_vowels = U"aeiou";
  es.rules = {{U"ll", {"ʝ"}, {}},
              {U"rr", {"r"}, {}},
              {U"qu", {"k"}, {}},
              {U"ch", {"t͡ʃ"}, {}},
              {U"ñ", {"ɲ"}, {}},
              {U"j", {"x"}, {}},
              {U"y", {"ʝ"}, {}},
              {U"z", {"θ"}, {}},
              {U"h", {}, {}},
              {U"r", {"ɾ"}, {}},
              {U"b", {"β"}, prev_in(es_vowels)},
              {U"v", {"β"}, prev_in(es_vowels)},
              {U"v", {"b"}, {}},
              {U"d", {"ð"}, prev_in(es_vowels)},
              {U"g", {"x"}, next_in(U"ei")},
              {U"g", {"ɣ"}, prev_in(es_vowels)},
              {U"g", {"ɡ"}, {}},
              {U"c", {"θ"}, next_in(U"ei")},
              {U"c", {"k"}, {}}};
  es.vowels = {"a", "e", "i", "o", "u"};
  es.penultimate_stress = true;
  out.push_back(es);

  SyntheticLanguage fr;
  fr.code = "fr";
  fr.onsets = {"b", "c", "d", "f", "g", "j", "l", "m", "n", "p", "r", "s", "t", "v", "ch", "qu"};
  fr.inner_onsets = {"gn"};
  fr.nuclei = {"a", "e", "i", "o", "u", "ou", "eau", "é", "è"};
  fr.codas = {"n", "r", "l", "s", "t"};
  fr.coda_rate = 0.3;
  fr.max_syllables = 3;
  const std::u32string fr_vowels = U"aeiouéè";
  fr.rules = {{U"eau", {"o"}, {}},
              {U"ou", {"u"}, {}},
              {U"ch", {"ʃ"}, {}},
              {U"qu", {"k"}, {}},
              {U"gn", {"ɲ"}, {}},
              {U"on", {"ɔ̃"}, next_not_in(fr_vowels + U"n")},
              {U"an", {"ɑ̃"}, next_not_in(fr_vowels + U"n")},
              {U"in", {"ɛ̃"}, next_not_in(fr_vowels + U"n")},
              {U"e", {}, at_end_after(fr_vowels)},
              {U"s", {}, at_end()},
              {U"t", {}, at_end()},
              {U"c", {"s"}, next_in(U"eiéè")},
              {U"c", {"k"}, {}},
              {U"g", {"ʒ"}, next_in(U"eiéè")},
              {U"g", {"ɡ"}, {}},
              {U"j", {"ʒ"}, {}},
              {U"r", {"ʁ"}, {}},
              {U"é", {"e"}, {}},
              {U"è", {"ɛ"}, {}},
              {U"e", {"ə"}, {}},
              {U"o", {"ɔ"}, {}},
              {U"u", {"y"}, {}}};
  out.push_back(fr);

  SyntheticLanguage it;
  it.code = "it";
  it.onsets = {"b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "gh"};
  it.inner_onsets = {"gn", "sc", "tt", "pp", "ll", "ss", "mm", "nn", "rr", "dd"};
  it.nuclei = {"a", "e", "i", "o", "u", "è", "ò"};
  it.codas = {"n", "l", "r"};
  it.coda_rate = 0.1;
  it.rules = {{U"gn", {"ɲ"}, {}},
              {U"ch", {"k"}, {}},
              {U"gh", {"ɡ"}, {}},
              {U"sc", {"ʃ"}, next_in(U"eiè")},
              {U"tt", {"tː"}, {}},
              {U"pp", {"pː"}, {}},
              {U"ll", {"lː"}, {}},
              {U"ss", {"sː"}, {}},
              {U"mm", {"mː"}, {}},
              {U"nn", {"nː"}, {}},
              {U"rr", {"rː"}, {}},
              {U"dd", {"dː"}, {}},
              {U"c", {"t͡ʃ"}, next_in(U"eiè")},
              {U"c", {"k"}, {}},
              {U"g", {"d͡ʒ"}, next_in(U"eiè")},
              {U"g", {"ɡ"}, {}},
              {U"z", {"t͡s"}, {}},
              {U"è", {"ɛ"}, {}},
              {U"ò", {"ɔ"}, {}}};
  it.vowels = {"a", "e", "i", "o", "u", "ɛ", "ɔ"};
  it.penultimate_stress = true;
  out.push_back(it);

  // Conflict pair: same letters, same word list, disjoint phoneme sets.
  const std::vector<std::string> letters_c = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  const std::vector<std::string> letters_v = {"a", "e", "i", "o", "u"};
  auto conflict = [&](std::string code, std::vector<std::string> consonants, std::vector<std::string> vowels) {
    SyntheticLanguage l;
    l.code = std::move(code);
    l.onsets = letters_c;
    l.nuclei = letters_v;
    l.codas = {"s", "n", "l", "r"};
    l.coda_rate = 0.2;
    l.max_syllables = 3;
    // letters are ASCII, so each pattern is one code point
    for (std::size_t i = 0; i < letters_c.size(); ++i) l.rules.push_back({std::u32string(1, char32_t(letters_c[i][0])), {consonants[i]}, {}});
    for (std::size_t i = 0; i < letters_v.size(); ++i) l.rules.push_back({std::u32string(1, char32_t(letters_v[i][0])), {vowels[i]}, {}});
    l.vowels = {vowels.begin(), vowels.end()};
    return l;
  };
  out.push_back(conflict("pt", {"b", "d", "f", "ɡ", "k", "ɫ", "m", "n", "p", "ɾ", "s", "t", "v", "z"}, {"ɐ", "ɛ", "i", "ɔ", "u"}));
  out.push_back(conflict("ro", {"β", "ð", "ɸ", "ɣ", "x", "ʎ", "ɱ", "ŋ", "c", "r", "ʃ", "θ", "ʋ", "ʒ"}, {"ə", "e", "ɨ", "o", "ʊ"}));
  return out;
}

std::string join(const Phones& p) {
  std::string s;
  for (const auto& t : p) s += t;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic six-language fixture corpus"};
  std::string out_dir = "data/fixture";
  std::size_t words = 1400;
  std::uint64_t seed = 2026;
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--words", words, "Unique words per language");
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(out_dir);
  const auto langs = languages();
  const auto shared = word_list(langs[4], words, seed ^ 0xC0FF11C7);  // pt and ro share this list
  for (std::size_t li = 0; li < langs.size(); ++li) {
    const auto& lang = langs[li];
    const auto list = (lang.code == "pt" || lang.code == "ro") ? shared : word_list(lang, words, seed + li);
    std::mt19937_64 rng(seed * 31 + li);
    std::string text = "# synthetic " + lang.code + " fixture, generated by make_fixture --seed " + std::to_string(seed) + "\n";
    for (const auto& w : list) {
      const Phones p = transduce(lang, latg2p::unicode::decode(w));
      text += w + "\t/" + join(p) + "/";
      if (lang.variant_rate > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < lang.variant_rate) {
        Phones alt = p;
        for (auto& t : alt) {
          if (lang.vowels.count(t)) {
            t = "ə";
            break;
          }
        }
        text += ", /" + join(alt) + "/";
      }
      text += '\n';
    }
    const auto path = std::filesystem::path(out_dir) / (lang.code + ".txt");
    latg2p::write_file_atomic(path, text);
    std::cout << path.string() << ": " << list.size() << " words\n";
  }
  return 0;
}
