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

// Run configuration: a line-oriented `key = value` file with optional
// `[section]` headers (keys inside a section are read as `section.key`).
// Command-line flags are applied on top as further assignments.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latg2p/corpus.hpp"
#include "latg2p/error.hpp"
#include "latg2p/io.hpp"
#include "latg2p/model.hpp"
#include "latg2p/train.hpp"

namespace latg2p {

struct RunConfig {
  std::string data_dir = "data/fixture";
  std::string work_dir = "runs/default";
  std::uint64_t split_seed = 42;
  std::uint64_t init_seed = 1;
  std::size_t threads = 1;
  NormalizationPolicy policy;
  ModelConfig model = ModelConfig::reference();
  TrainConfig train = TrainConfig::reference();

  static RunConfig toy() {
    RunConfig cfg;
    cfg.model = ModelConfig::toy();
    cfg.train = TrainConfig::toy();
    return cfg;
  }
};

/// Ordered key/value assignments as they appear in a config file.
using Assignments = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::InvalidConfig, "'" + key + "' expects an integer, got '" + std::string(value) + "'");
  }
  return out;
}

inline double parse_double(const std::string& key, std::string_view value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(std::string(value), &used);
    if (used == value.size()) return out;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidConfig, "'" + key + "' expects a number, got '" + std::string(value) + "'");
}

inline bool parse_bool(const std::string& key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::InvalidConfig, "'" + key + "' expects true or false, got '" + std::string(value) + "'");
}

}  // namespace detail

/// Parses config text. `#` starts a comment; blank lines are ignored.
inline Assignments parse_config_text(std::string_view text) {
  Assignments out;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    std::string key(detail::trim(line.substr(0, eq)));
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    out.emplace_back(std::move(key), std::string(detail::trim(line.substr(eq + 1))));
  }
  return out;
}

/// Applies one assignment. Unknown keys are rejected.
inline void apply_setting(RunConfig& cfg, const std::string& key, std::string_view v) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  auto& m = cfg.model;
  auto& t = cfg.train;
  if (key == "data_dir") cfg.data_dir = std::string(v);
  else if (key == "work_dir") cfg.work_dir = std::string(v);
  else if (key == "threads") cfg.threads = parse_int<std::size_t>(key, v);
  else if (key == "init_seed") cfg.init_seed = parse_int<std::uint64_t>(key, v);
  else if (key == "corpus.seed") cfg.split_seed = parse_int<std::uint64_t>(key, v);
  else if (key == "corpus.keep_stress") cfg.policy.keep_stress = parse_bool(key, v);
  else if (key == "corpus.multi_pron_rule") cfg.policy.multi_pron_rule = parse_multi_pron_rule(v);
  else if (key == "corpus.diacritic_allowlist") cfg.policy.diacritic_allowlist = parse_allowlist(v);
  else if (key == "model.d_model") m.d_model = parse_int<std::size_t>(key, v);
  else if (key == "model.n_heads") m.n_heads = parse_int<std::size_t>(key, v);
  else if (key == "model.n_enc_layers") m.n_enc_layers = parse_int<std::size_t>(key, v);
  else if (key == "model.n_dec_layers") m.n_dec_layers = parse_int<std::size_t>(key, v);
  else if (key == "model.d_ffn") m.d_ffn = parse_int<std::size_t>(key, v);
  else if (key == "model.dropout") m.dropout = parse_double(key, v);
  else if (key == "model.rope_theta") m.rope_theta = parse_double(key, v);
  else if (key == "model.max_len") m.max_len = parse_int<std::size_t>(key, v);
  else if (key == "model.use_lang_id") m.use_lang_id = parse_bool(key, v);
  else if (key == "train.total_steps") t.total_steps = parse_int<std::size_t>(key, v);
  else if (key == "train.warmup_steps") t.warmup_steps = parse_int<std::size_t>(key, v);
  else if (key == "train.peak_lr") t.peak_lr = parse_double(key, v);
  else if (key == "train.batch_size") t.batch_size = parse_int<std::size_t>(key, v);
  else if (key == "train.beta1") t.beta1 = parse_double(key, v);
  else if (key == "train.beta2") t.beta2 = parse_double(key, v);
  else if (key == "train.eps") t.eps = parse_double(key, v);
  else if (key == "train.weight_decay") t.weight_decay = parse_double(key, v);
  else if (key == "train.grad_clip_norm") t.grad_clip_norm = parse_double(key, v);
  else if (key == "train.val_every") t.val_every = parse_int<std::size_t>(key, v);
  else if (key == "train.log_every") t.log_every = parse_int<std::size_t>(key, v);
  else if (key == "train.seed") t.seed = parse_int<std::uint64_t>(key, v);
  else if (key == "train.lang_temperature") t.lang_temperature = parse_double(key, v);
  else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
}

inline void apply_settings(RunConfig& cfg, const Assignments& settings) {
  for (const auto& [key, value] : settings) apply_setting(cfg, key, value);
}

/// Parses a `key=value` override as given on the command line.
inline std::pair<std::string, std::string> parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw Error(ErrorCode::InvalidConfig, "override '" + std::string(text) + "' is not key=value");
  return {std::string(detail::trim(text.substr(0, eq))), std::string(detail::trim(text.substr(eq + 1)))};
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {}) {
  apply_settings(base, parse_config_text(read_file(path)));
  return base;
}

/// Serializes every setting; parsing the result reproduces `cfg`.
inline std::string run_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  auto flag = [](bool b) { return b ? "true" : "false"; };
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  std::string allowlist = describe(cfg.policy);
  allowlist = allowlist.substr(allowlist.find("diacritic_allowlist=") + std::string_view("diacritic_allowlist=").size());
  out << "data_dir = " << cfg.data_dir << "\nwork_dir = " << cfg.work_dir << "\nthreads = " << cfg.threads
      << "\ninit_seed = " << cfg.init_seed << "\n\n[corpus]\nseed = " << cfg.split_seed << "\nkeep_stress = " << flag(cfg.policy.keep_stress)
      << "\nmulti_pron_rule = " << to_string(cfg.policy.multi_pron_rule) << "\ndiacritic_allowlist = " << allowlist
      << "\n\n[model]\nd_model = " << m.d_model << "\nn_heads = " << m.n_heads << "\nn_enc_layers = " << m.n_enc_layers
      << "\nn_dec_layers = " << m.n_dec_layers << "\nd_ffn = " << m.d_ffn << "\ndropout = " << num(m.dropout)
      << "\nrope_theta = " << num(m.rope_theta) << "\nmax_len = " << m.max_len << "\nuse_lang_id = " << flag(m.use_lang_id)
      << "\n\n[train]\ntotal_steps = " << t.total_steps << "\nwarmup_steps = " << t.warmup_steps << "\npeak_lr = " << num(t.peak_lr)
      << "\nbatch_size = " << t.batch_size << "\nbeta1 = " << num(t.beta1) << "\nbeta2 = " << num(t.beta2) << "\neps = " << num(t.eps)
      << "\nweight_decay = " << num(t.weight_decay) << "\ngrad_clip_norm = " << num(t.grad_clip_norm) << "\nval_every = " << t.val_every
      << "\nlog_every = " << t.log_every << "\nseed = " << t.seed << "\nlang_temperature = " << num(t.lang_temperature) << '\n';
  return out.str();
}

inline nlohmann::json run_config_json(const RunConfig& cfg) {
  return nlohmann::json{{"data_dir", cfg.data_dir},
                        {"work_dir", cfg.work_dir},
                        {"threads", cfg.threads},
                        {"init_seed", cfg.init_seed},
                        {"split_seed", cfg.split_seed},
                        {"policy", describe(cfg.policy)},
                        {"model", cfg.model},
                        {"train", cfg.train}};
}

}  // namespace latg2p
