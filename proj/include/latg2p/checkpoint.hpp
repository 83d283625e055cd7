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

// Checkpoint layout (little-endian):
//   "LATP" | u32 format version | u32 manifest bytes | UTF-8 JSON manifest |
//   fp32 tensor data in manifest order.
// The manifest carries the model config, the vocab hash and the ordered
// tensor names and shapes; callers may attach extra provenance keys.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "latg2p/error.hpp"
#include "latg2p/io.hpp"
#include "latg2p/model.hpp"

namespace latg2p {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'L', 'A', 'T', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct LoadedCheckpoint {
  Model<T> model;
  nlohmann::json manifest;
  std::string vocab_hash;
};

template <typename T>
std::string checkpoint_bytes(const Model<T>& model, const std::string& vocab_hash, const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json manifest = extra.is_object() ? extra : nlohmann::json::object();
  manifest["format"] = "latg2p-checkpoint";
  manifest["config"] = model.config();
  manifest["vocab_hash"] = vocab_hash;
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t total = 0;
  for (const auto& [name, p] : model.named_parameters()) {
    tensors.push_back({{"name", name}, {"shape", p->value.shape()}});
    total += p->value.numel();
  }
  manifest["tensors"] = std::move(tensors);
  const std::string text = manifest.dump();

  std::string out;
  out.reserve(12 + text.size() + total * sizeof(float));
  out.append(kCheckpointMagic, 4);
  auto put_u32 = [&](std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
  };
  put_u32(kCheckpointVersion);
  put_u32(static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& [name, p] : model.named_parameters()) {
    for (T v : p->value.values()) {
      const float f = static_cast<float>(v);
      char buf[4];
      std::memcpy(buf, &f, 4);
      out.append(buf, 4);
    }
  }
  return out;
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& vocab_hash, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object()) {
  write_file_atomic(path, checkpoint_bytes(model, vocab_hash, extra));
}

/// Parses checkpoint bytes. Rejects bad magic or version, truncation,
/// trailing bytes, and tensors that disagree with the config. When
/// `expected_vocab_hash` is given, a different recorded hash raises
/// VocabMismatch.
template <typename T>
LoadedCheckpoint<T> parse_checkpoint(std::string_view bytes, const std::optional<std::string>& expected_vocab_hash = std::nullopt) {
  auto corrupt = [](const std::string& msg) { return Error(ErrorCode::CorruptCheckpoint, msg); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw corrupt("bad magic");
  std::uint32_t version = 0, manifest_len = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&manifest_len, bytes.data() + 8, 4);
  if (version != kCheckpointVersion) throw corrupt("unsupported format version " + std::to_string(version));
  if (bytes.size() < 12 + static_cast<std::size_t>(manifest_len)) throw corrupt("truncated manifest");

  LoadedCheckpoint<T> out;
  try {
    out.manifest = nlohmann::json::parse(bytes.substr(12, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("manifest is not valid JSON: ") + e.what());
  }
  ModelConfig cfg;
  try {
    cfg = out.manifest.at("config").template get<ModelConfig>();
    out.vocab_hash = out.manifest.at("vocab_hash").template get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("manifest is missing fields: ") + e.what());
  }
  if (expected_vocab_hash && *expected_vocab_hash != out.vocab_hash) {
    throw Error(ErrorCode::VocabMismatch, "checkpoint was trained with vocab " + out.vocab_hash + ", got " + *expected_vocab_hash);
  }
  try {
    out.model = Model<T>::allocate(cfg);
  } catch (const Error& e) {
    throw corrupt(std::string("manifest config is invalid: ") + e.what());
  }

  const auto params = out.model.named_parameters();
  const auto& tensors = out.manifest.at("tensors");
  if (!tensors.is_array() || tensors.size() != params.size()) throw corrupt("tensor list does not match the config");
  std::size_t offset = 12 + manifest_len;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params[i];
    if (tensors[i].value("name", std::string()) != name || tensors[i].value("shape", Shape()) != p->value.shape()) {
      throw corrupt("tensor " + std::to_string(i) + " is " + tensors[i].dump() + ", expected " + name + shape_string(p->value.shape()));
    }
    const std::size_t n = p->value.numel();
    if (bytes.size() < offset + n * sizeof(float)) throw corrupt("truncated tensor data in " + name);
    for (std::size_t j = 0; j < n; ++j) {
      float f = 0.0f;
      std::memcpy(&f, bytes.data() + offset + j * sizeof(float), sizeof(float));
      p->value[j] = static_cast<T>(f);
    }
    offset += n * sizeof(float);
  }
  if (offset != bytes.size()) throw corrupt(std::to_string(bytes.size() - offset) + " trailing bytes after tensor data");
  return out;
}

template <typename T = float>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path, const std::optional<std::string>& expected_vocab_hash = std::nullopt) {
  return parse_checkpoint<T>(read_file(path), expected_vocab_hash);
}

}  // namespace latg2p
