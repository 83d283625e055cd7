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

// Text tables and JSON-lines records for evaluation, ablation and
// throughput results.

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "latg2p/corpus.hpp"
#include "latg2p/error.hpp"
#include "latg2p/eval.hpp"
#include "latg2p/language.hpp"
#include "latg2p/unicode.hpp"

namespace latg2p {

/// Published per-language PER (%) of the external comparison systems, shown
/// as reference columns next to our numbers. ByT5 has no Romanian figure.
struct ReferenceColumn {
  std::string name;
  std::map<LanguageId, double> per;
  double mean = 0.0;
};

inline std::vector<ReferenceColumn> reference_columns() {
  using L = LanguageId;
  return {
      {"ByT5", {{L::en, 14.0}, {L::es, 0.25}, {L::fr, 0.60}, {L::it, 3.1}, {L::pt, 9.1}}, 5.4},
      {"WFST", {{L::en, 10.4}, {L::es, 0.04}, {L::fr, 0.49}, {L::it, 5.4}, {L::pt, 2.7}, {L::ro, 0.23}}, 3.2},
  };
}

namespace detail {

/// Left-aligns `text` in `width` display columns (counting code points).
inline std::string pad(const std::string& text, std::size_t width) {
  const std::size_t len = unicode::length(text);
  return len >= width ? text + " " : text + std::string(width - len, ' ');
}

inline std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

inline std::string with_half_width(double per, double half) { return fmt("%.2f", per) + " (±" + fmt("%.2f", half) + ")"; }

}  // namespace detail

/// PER table: language, our PER with Wilson half-width, reference columns.
inline std::string format_per_table(const EvalReport& report) {
  const auto refs = reference_columns();
  std::ostringstream out;
  out << detail::pad("Lang", 6) << detail::pad("Ours", 18);
  for (const auto& r : refs) out << detail::pad(r.name, 8);
  out << '\n';
  for (const auto& row : report.languages) {
    out << detail::pad(std::string(code_of(row.lang)), 6) << detail::pad(detail::with_half_width(row.per, 0.5 * (row.ci_hi - row.ci_lo)), 18);
    for (const auto& r : refs) {
      auto it = r.per.find(row.lang);
      out << detail::pad(it == r.per.end() ? "—" : detail::fmt("%.2f", it->second), 8);
    }
    out << '\n';
  }
  out << detail::pad("Mean", 6) << detail::pad(detail::fmt("%.2f", report.mean_per), 18);
  for (const auto& r : refs) out << detail::pad(detail::fmt("%.2f", r.mean), 8);
  out << '\n';
  return out.str();
}

/// Ablation table: no-id PER with half-width, delta against the with-id
/// system, one-sided p-value.
inline std::string format_ablation_table(const AblationReport& report) {
  std::ostringstream out;
  out << detail::pad("Lang", 6) << detail::pad("No-ID", 18) << detail::pad("Δ vs. Ours", 12) << "p\n";
  for (const auto& row : report.rows) {
    out << detail::pad(std::string(code_of(row.lang)), 6) << detail::pad(detail::with_half_width(row.per_without, row.ci_half_without), 18)
        << detail::pad(detail::fmt("%+.2f", row.delta), 12) << detail::fmt("%.3g", row.test.p) << '\n';
  }
  out << detail::pad("Mean", 6) << detail::pad(detail::fmt("%.2f", report.mean_without), 18)
      << detail::pad(detail::fmt("%+.2f", report.mean_delta), 12) << '\n';
  return out.str();
}

inline std::string format_throughput_table(const std::vector<ThroughputReport>& reports) {
  std::ostringstream out;
  out << detail::pad("Device", 24) << detail::pad("Words/s", 10) << "Chars/s\n";
  for (const auto& r : reports) {
    out << detail::pad(r.device, 24) << detail::pad(detail::fmt("%.1f", r.words_per_sec), 10) << detail::fmt("%.1f", r.chars_per_sec) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_record(const LanguageResult& r) {
  return {{"lang", std::string(code_of(r.lang))}, {"n_words", r.n_words}, {"n_ref", r.n_ref}, {"n_errors", r.n_errors},
          {"per", r.per},                         {"ci_lo", r.ci_lo},     {"ci_hi", r.ci_hi}};
}

/// One `{"kind":"language",...}` line per language followed by one
/// `{"kind":"summary",...}` line.
inline std::string eval_report_jsonl(const EvalReport& report) {
  std::ostringstream out;
  for (const auto& r : report.languages) {
    auto j = to_record(r);
    j["kind"] = "language";
    j["system"] = report.system;
    j["split"] = report.split;
    out << j.dump() << '\n';
  }
  nlohmann::json summary = {{"kind", "summary"},
                            {"system", report.system},
                            {"split", report.split},
                            {"mean_per", report.mean_per},
                            {"checkpoint_hash", report.checkpoint_hash},
                            {"param_count", report.param_count},
                            {"checkpoint_bytes", report.checkpoint_bytes},
                            {"config", report.config}};
  out << summary.dump() << '\n';
  return out.str();
}

inline EvalReport parse_eval_report_jsonl(std::string_view text) {
  EvalReport report;
  bool have_summary = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedLine, std::string("report record is not JSON: ") + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "language") {
      LanguageResult r;
      r.lang = parse_language(j.at("lang").get<std::string>());
      r.n_words = j.at("n_words").get<std::size_t>();
      r.n_ref = j.at("n_ref").get<std::size_t>();
      r.n_errors = j.at("n_errors").get<std::size_t>();
      r.per = j.at("per").get<double>();
      r.ci_lo = j.at("ci_lo").get<double>();
      r.ci_hi = j.at("ci_hi").get<double>();
      report.languages.push_back(r);
    } else if (kind == "summary") {
      have_summary = true;
      report.system = j.value("system", report.system);
      report.split = j.value("split", report.split);
      report.mean_per = j.at("mean_per").get<double>();
      report.checkpoint_hash = j.value("checkpoint_hash", "");
      report.param_count = j.value("param_count", std::size_t{0});
      report.checkpoint_bytes = j.value("checkpoint_bytes", std::size_t{0});
      report.config = j.value("config", nlohmann::json::object());
    }
  }
  if (!have_summary) throw Error(ErrorCode::MalformedLine, "report has no summary record");
  return report;
}

inline std::string ablation_report_jsonl(const AblationReport& report) {
  std::ostringstream out;
  for (const auto& row : report.rows) {
    nlohmann::json j = {{"kind", "language"},          {"lang", std::string(code_of(row.lang))},
                        {"per_with", row.per_with},    {"per_without", row.per_without},
                        {"delta", row.delta},          {"z", row.test.z},
                        {"p", row.test.p},             {"degenerate", row.test.degenerate},
                        {"e_with", row.test.e1},       {"n_with", row.test.n1},
                        {"e_without", row.test.e2},    {"n_without", row.test.n2}};
    out << j.dump() << '\n';
  }
  nlohmann::json summary = {{"kind", "summary"}, {"mean_with", report.mean_with}, {"mean_without", report.mean_without}, {"mean_delta", report.mean_delta}};
  out << summary.dump() << '\n';
  return out.str();
}

inline nlohmann::json to_record(const ThroughputReport& r) {
  return {{"device", r.device},   {"words_per_sec", r.words_per_sec}, {"chars_per_sec", r.chars_per_sec},
          {"n_words", r.n_words}, {"n_chars", r.n_chars},             {"wall_seconds", r.wall_seconds}};
}

inline nlohmann::json stats_json(const std::vector<CorpusStatsRow>& rows, const CorpusSplit& split) {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& r : rows) langs.push_back({{"lang", std::string(code_of(r.lang))}, {"train", r.train}, {"val", r.val}, {"test", r.test}});
  return {{"split_seed", split.split_seed}, {"policy", describe(split.policy)}, {"languages", langs}};
}

}  // namespace latg2p
