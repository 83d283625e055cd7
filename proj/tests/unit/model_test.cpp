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

#include <cmath>
#include <random>

#include "latg2p/inference.hpp"
#include "latg2p/model.hpp"

namespace latg2p {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.d_model = 32;
  c.n_heads = 4;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.d_ffn = 64;
  c.grapheme_vocab_size = 30;
  c.phoneme_vocab_size = 30;
  c.dropout = 0.0;
  return c;
}

template <typename Fn>
void expect_error(ErrorCode code, Fn&& fn) {
  try {
    fn();
    FAIL() << "no exception";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(ParamCount, SmallConfigMatchesHandCount) {
  const auto m = init_model<float>(small_config(), 1);
  EXPECT_EQ(count_params(m).total, 24994u);
  EXPECT_EQ(closed_form_param_count(small_config()), 24994u);
}

TEST(ParamCount, ZeroLayersLeavesEmbeddingsAndProjection) {
  auto c = small_config();
  c.n_enc_layers = 0;
  c.n_dec_layers = 0;
  // 40*32 source rows + 34*32 target rows + 32*34+34 projection.
  EXPECT_EQ(count_params(init_model<float>(c, 1)).total, 3490u);
}

TEST(ParamCount, ReferenceAndLanguageRows) {
  EXPECT_EQ(closed_form_param_count(ModelConfig::reference()), 7449713u);
  auto no_id = ModelConfig::reference();
  no_id.use_lang_id = false;
  EXPECT_EQ(closed_form_param_count(no_id), 7448177u);

  const auto m = Model<float>::allocate(ModelConfig::reference());
  const auto count = count_params(m);
  EXPECT_EQ(count.total, 7449713u);
  EXPECT_EQ(count.breakdown.at("lang_id_embedding"), 1536u);
  std::size_t sum = 0;
  for (const auto& [group, n] : count.breakdown) sum += n;
  EXPECT_EQ(sum, count.total);
}

TEST(ModelConfig, Validation) {
  auto c = ModelConfig::reference();
  c.d_model = 255;
  expect_error(ErrorCode::InvalidConfig, [&] { c.validate(); });
  c = ModelConfig::reference();
  c.d_model = 24;
  c.n_heads = 8;  // head_dim 3
  expect_error(ErrorCode::InvalidConfig, [&] { c.validate(); });
  EXPECT_NO_THROW(ModelConfig::reference().validate());
  EXPECT_NO_THROW(ModelConfig::toy().validate());
}

TEST(Init, SeedDeterminesParameters) {
  const auto a = init_model<float>(small_config(), 7);
  const auto b = init_model<float>(small_config(), 7);
  const auto c = init_model<float>(small_config(), 8);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->value, pb[i]->value);
    if (pa[i]->value != pc[i]->value) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Forward, LogitsShape) {
  auto c = small_config();
  c.phoneme_vocab_size = 109;
  const auto m = init_model<float>(c, 1);
  const auto logits = forward(m, {5, 10, 11, 12}, {1, 4, 5, 6, 7, 8, 9});
  EXPECT_EQ(logits.shape(), (Shape{7, 113}));
  for (float v : logits.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Forward, RequiresLanguageTokenWhenEnabled) {
  const auto m = init_model<float>(small_config(), 1);
  expect_error(ErrorCode::InvalidConfig, [&] { forward(m, {10, 11}, {1}); });
  expect_error(ErrorCode::InvalidConfig, [&] { forward(m, {}, {1}); });
}

TEST(Forward, DecoderIsCausal) {
  const auto m = init_model<double>(small_config(), 3);
  const std::vector<int> src = {4, 12, 15, 20};
  const auto base = forward(m, src, {1, 5, 6, 7, 8});
  const auto changed = forward(m, src, {1, 5, 6, 9, 30});
  const std::size_t V = base.cols();
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < V; ++j) EXPECT_EQ(base.at(t, j), changed.at(t, j));
  }
  bool later_differs = false;
  for (std::size_t j = 0; j < V; ++j) later_differs |= base.at(3, j) != changed.at(3, j);
  EXPECT_TRUE(later_differs);
}

TEST(Forward, BatchRowsMatchSingleExamples) {
  const auto m = init_model<float>(small_config(), 4);
  SeqBatch b;
  b.batch = 2;
  b.src_len = 4;
  b.tgt_len = 3;
  b.src = {4, 12, 13, 14, 5, 20, kPad, kPad};
  b.tgt_in = {1, 6, 7, 1, 8, kPad};
  auto tape = Tape<float>::inference();
  const auto batched = m.forward(tape, b)->value;
  const auto first = forward(m, {4, 12, 13, 14}, {1, 6, 7});
  const auto second = forward(m, {5, 20}, {1, 8});
  const std::size_t V = first.cols();
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < V; ++j) EXPECT_NEAR(batched.at(t, j), first.at(t, j), 1e-5);
  }
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t j = 0; j < V; ++j) EXPECT_NEAR(batched.at(3 + t, j), second.at(t, j), 1e-5);
  }
}

TEST(Forward, SourceTooLong) {
  auto c = small_config();
  c.max_len = 4;
  const auto m = init_model<float>(c, 1);
  expect_error(ErrorCode::SequenceTooLong, [&] { forward(m, {4, 10, 11, 12, 13}, {1}); });
  expect_error(ErrorCode::SequenceTooLong, [&] { DecodeSession<float>(m, {4, 10, 11, 12, 13}); });
  DecodeSession<float> session(m, {4, 10});
  for (int i = 0; i < 4; ++i) session.step(kBos);
  expect_error(ErrorCode::SequenceTooLong, [&] { session.step(kBos); });
}

TEST(DecodeSession, MatchesFullForward) {
  auto c = small_config();
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  const auto m = init_model<float>(c, 5);
  const std::vector<int> src = {6, 11, 17, 23, 12};
  const std::vector<int> tgt = {1, 9, 4, 20, 7, 7};
  const auto full = forward(m, src, tgt);
  DecodeSession<float> session(m, src);
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    const auto row = session.step(tgt[t]);
    ASSERT_EQ(row.size(), full.cols());
    for (std::size_t j = 0; j < row.size(); ++j) EXPECT_NEAR(row[j], full.at(t, j), 1e-4) << "t=" << t;
  }
  EXPECT_EQ(session.position(), tgt.size());
}

TEST(DecodeSession, MatchesFullForwardWithoutLanguageId) {
  auto c = small_config();
  c.use_lang_id = false;
  const auto m = init_model<float>(c, 6);
  const std::vector<int> src = {10, 15, 20};
  const auto full = forward(m, src, {1, 5});
  DecodeSession<float> session(m, src);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto row = session.step(t == 0 ? 1 : 5);
    for (std::size_t j = 0; j < row.size(); ++j) EXPECT_NEAR(row[j], full.at(t, j), 1e-4);
  }
}

TEST(ApplyRope, PositionZeroIsIdentity) {
  Tensor<double> x({2, 1, 8});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(-1, 1);
  for (auto& v : x.values()) v = dist(rng);
  EXPECT_EQ(apply_rope(x, {0}, 10000.0), x);
}

TEST(ApplyRope, PreservesPairNorms) {
  Tensor<double> x({3, 5, 16});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-1, 1);
  for (auto& v : x.values()) v = dist(rng);
  const auto y = apply_rope(x, {0, 1, 7, 33, 63}, 10000.0);
  for (std::size_t base = 0; base < x.numel(); base += 2) {
    const double before = std::hypot(x[base], x[base + 1]);
    const double after = std::hypot(y[base], y[base + 1]);
    EXPECT_NEAR(before, after, 1e-12);
  }
}

TEST(ApplyRope, FirstPairRotatesByPosition) {
  Tensor<double> x({1, 1, 2}, {1.0, 0.0});
  const auto y = apply_rope(x, {1}, 10000.0);
  EXPECT_NEAR(y[0], 0.5403023, 1e-7);
  EXPECT_NEAR(y[1], 0.8414710, 1e-7);
}

TEST(ApplyRope, Errors) {
  expect_error(ErrorCode::OddHeadDim, [] { apply_rope(Tensor<float>({1, 1, 3}), {0}, 10000.0); });
  expect_error(ErrorCode::ShapeMismatch, [] { apply_rope(Tensor<float>({1, 2, 4}), {0}, 10000.0); });
  expect_error(ErrorCode::ShapeMismatch, [] { apply_rope(Tensor<float>({2, 4}), {0, 1}, 10000.0); });
}

TEST(ModelSourceIds, DropsLanguageTokenForNoIdVariant) {
  const auto vocab = build_vocabs({{"ab", {"a", "b"}, LanguageId::es}});
  auto c = ModelConfig::reference().with_vocab(vocab);
  EXPECT_EQ(model_source_ids(c, "ab", LanguageId::es, vocab), (std::vector<int>{5, 10, 11}));
  c.use_lang_id = false;
  EXPECT_EQ(model_source_ids(c, "ab", LanguageId::es, vocab), (std::vector<int>{10, 11}));
}

}  // namespace
}  // namespace latg2p
