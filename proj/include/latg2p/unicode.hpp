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

// Thin UTF-8 wrappers over ICU. Everything in the library passes UTF-8
// std::string around; ICU's UTF-16 UnicodeString never escapes this header.

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "latg2p/error.hpp"

namespace latg2p::unicode {

namespace detail {

inline icu::UnicodeString to_icu(std::string_view utf8) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
}

inline std::string from_icu(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

inline void check(UErrorCode status, const char* what) {
  if (U_FAILURE(status)) throw Error(ErrorCode::Io, std::string("ICU failure in ") + what + ": " + u_errorName(status));
}

}  // namespace detail

inline std::string nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  detail::check(status, "getNFCInstance");
  icu::UnicodeString out = norm->normalize(detail::to_icu(utf8), status);
  detail::check(status, "normalize");
  return detail::from_icu(out);
}

inline std::string to_lower(std::string_view utf8) {
  icu::UnicodeString s = detail::to_icu(utf8);
  s.toLower(icu::Locale::getRoot());
  return detail::from_icu(s);
}

inline std::string case_fold(std::string_view utf8) {
  icu::UnicodeString s = detail::to_icu(utf8);
  s.foldCase();
  return detail::from_icu(s);
}

/// Decodes UTF-8 into code points. Ill-formed sequences become U+FFFD.
inline std::vector<char32_t> decode(std::string_view utf8) {
  std::vector<char32_t> out;
  out.reserve(utf8.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
  const auto length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c = 0;
    U8_NEXT(bytes, i, length, c);
    out.push_back(c < 0 ? char32_t{0xFFFD} : static_cast<char32_t>(c));
  }
  return out;
}

inline std::string encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

inline std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t cp : cps) out += encode(cp);
  return out;
}

/// One UTF-8 string per code point.
inline std::vector<std::string> code_points(std::string_view utf8) {
  std::vector<std::string> out;
  for (char32_t cp : decode(utf8)) out.push_back(encode(cp));
  return out;
}

inline std::size_t length(std::string_view utf8) { return decode(utf8).size(); }

/// Extended grapheme clusters (UAX #29) via ICU's character break iterator.
inline std::vector<std::string> grapheme_clusters(std::string_view utf8) {
  thread_local std::unique_ptr<icu::BreakIterator> iter = [] {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> it(icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(), status));
    detail::check(status, "createCharacterInstance");
    return it;
  }();
  icu::UnicodeString text = detail::to_icu(utf8);
  iter->setText(text);
  std::vector<std::string> out;
  int32_t start = iter->first();
  for (int32_t end = iter->next(); end != icu::BreakIterator::DONE; start = end, end = iter->next()) {
    out.push_back(detail::from_icu(text.tempSubStringBetween(start, end)));
  }
  return out;
}

inline bool is_combining_mark(char32_t cp) {
  const int8_t type = u_charType(static_cast<UChar32>(cp));
  return type == U_NON_SPACING_MARK || type == U_ENCLOSING_MARK || type == U_COMBINING_SPACING_MARK;
}

inline bool is_whitespace(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0; }

inline bool is_punctuation(char32_t cp) { return u_ispunct(static_cast<UChar32>(cp)) != 0; }

}  // namespace latg2p::unicode
