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

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "latg2p/error.hpp"

namespace latg2p {

// Index order is alphabetical by code and must never change: it is baked
// into vocab files, checkpoints and split manifests.
enum class LanguageId : std::size_t { en = 0, es = 1, fr = 2, it = 3, pt = 4, ro = 5 };

inline constexpr std::size_t kNumLanguages = 6;

inline constexpr std::array<LanguageId, kNumLanguages> kAllLanguages = {
    LanguageId::en, LanguageId::es, LanguageId::fr, LanguageId::it, LanguageId::pt, LanguageId::ro};

inline constexpr std::array<std::string_view, kNumLanguages> kLanguageCodes = {"en", "es", "fr",
                                                                               "it", "pt", "ro"};

inline constexpr std::size_t index_of(LanguageId lang) noexcept { return static_cast<std::size_t>(lang); }

inline constexpr std::string_view code_of(LanguageId lang) noexcept { return kLanguageCodes[index_of(lang)]; }

inline std::optional<LanguageId> try_parse_language(std::string_view code) noexcept {
  for (std::size_t i = 0; i < kNumLanguages; ++i) {
    if (kLanguageCodes[i] == code) return static_cast<LanguageId>(i);
  }
  return std::nullopt;
}

inline LanguageId parse_language(std::string_view code) {
  if (auto lang = try_parse_language(code)) return *lang;
  throw Error(ErrorCode::UnknownLanguage, "unsupported language code '" + std::string(code) + "'");
}

inline LanguageId language_from_index(std::size_t index) {
  if (index >= kNumLanguages) {
    throw Error(ErrorCode::UnknownLanguage, "language index " + std::to_string(index) + " out of range");
  }
  return static_cast<LanguageId>(index);
}

}  // namespace latg2p
