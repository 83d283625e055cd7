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

// Shared fixtures for the unit and acceptance suites.

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "latg2p/corpus.hpp"
#include "latg2p/language.hpp"

namespace latg2p::testing {

inline std::filesystem::path fixture_dir() { return LATG2P_FIXTURE_DIR; }
inline std::filesystem::path excerpt_dir() { return LATG2P_EXCERPT_DIR; }

/// Fresh scratch directory under the system temp dir. The process id keeps
/// concurrently running test processes (ctest -j) apart.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("latg2p_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// `n` distinct words over a-h with a letter-per-phoneme transcription.
inline std::vector<WordEntry> letter_corpus(std::size_t n, LanguageId lang, std::uint64_t seed) {
  static const char* kPhones[] = {"a", "b", "k", "d", "e", "f", "ɡ", "h"};
  std::mt19937_64 rng(seed);
  std::vector<WordEntry> out;
  std::set<std::string> seen;
  while (out.size() < n) {
    WordEntry e;
    e.lang = lang;
    const std::size_t len = 3 + bounded_draw(rng, 5);
    for (std::size_t j = 0; j < len; ++j) {
      const std::size_t c = bounded_draw(rng, 8);
      e.word += static_cast<char>('a' + c);
      e.phonemes.emplace_back(kPhones[c]);
    }
    if (seen.insert(e.word).second) out.push_back(std::move(e));
  }
  return out;
}

}  // namespace latg2p::testing
