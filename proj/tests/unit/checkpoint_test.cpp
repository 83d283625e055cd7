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

#include <gtest/gtest.h>

#include "latg2p/checkpoint.hpp"
#include "latg2p/io.hpp"
#include "test_util.hpp"

namespace latg2p {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_enc_layers = 1;
  c.n_dec_layers = 2;
  c.d_ffn = 32;
  c.grapheme_vocab_size = 12;
  c.phoneme_vocab_size = 9;
  return c;
}

std::optional<ErrorCode> parse_error(std::string_view bytes, const std::optional<std::string>& hash = std::nullopt) {
  try {
    parse_checkpoint<float>(bytes, hash);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto model = init_model<float>(tiny_config(), 11);
  const auto path = testing::scratch_dir("ckpt") / "m.latp";
  save_checkpoint(model, "abc123", path, {{"note", "x"}});
  const auto loaded = load_checkpoint<float>(path, std::string("abc123"));
  EXPECT_EQ(loaded.vocab_hash, "abc123");
  EXPECT_EQ(loaded.model.config(), model.config());
  EXPECT_EQ(loaded.manifest.at("note"), "x");
  const auto a = model.named_parameters(), b = loaded.model.named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(a[i].second->value, b[i].second->value) << a[i].first;
  }
  // Re-serializing the loaded model reproduces the file byte for byte.
  EXPECT_EQ(checkpoint_bytes(loaded.model, "abc123", {{"note", "x"}}), read_file(path));
}

TEST(Checkpoint, WithoutLanguageIdRoundTrips) {
  auto c = tiny_config();
  c.use_lang_id = false;
  const auto bytes = checkpoint_bytes(init_model<float>(c, 2), "h");
  EXPECT_FALSE(parse_checkpoint<float>(bytes).model.config().use_lang_id);
}

TEST(Checkpoint, TruncationAndCorruption) {
  const auto bytes = checkpoint_bytes(init_model<float>(tiny_config(), 1), "h");
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{11}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_EQ(parse_error(bytes.substr(0, cut)), ErrorCode::CorruptCheckpoint) << cut;
  }
  EXPECT_EQ(parse_error(bytes + "x"), ErrorCode::CorruptCheckpoint);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(parse_error(bad_magic), ErrorCode::CorruptCheckpoint);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(parse_error(bad_version), ErrorCode::CorruptCheckpoint);
}

TEST(Checkpoint, VocabHashMismatch) {
  const auto bytes = checkpoint_bytes(init_model<float>(tiny_config(), 1), "aaaa");
  EXPECT_EQ(parse_error(bytes, std::string("bbbb")), ErrorCode::VocabMismatch);
  EXPECT_NO_THROW(parse_checkpoint<float>(bytes, std::string("aaaa")));
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    load_checkpoint<float>(testing::scratch_dir("ckpt-missing") / "nope.latp");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Checkpoint, LoadsIntoDouble) {
  const auto model = init_model<float>(tiny_config(), 3);
  const auto loaded = parse_checkpoint<double>(checkpoint_bytes(model, "h"));
  const auto a = model.parameters();
  const auto b = loaded.model.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value.cast<double>(), b[i]->value);
}

}  // namespace
}  // namespace latg2p
