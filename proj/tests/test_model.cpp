// Copyright 2026 The smf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "smf/model.hpp"
#include "smf/optim.hpp"
#include "smf/training.hpp"

namespace smf {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 40;
  c.d_model = 16;
  c.n_layers = 3;
  c.n_attn_heads = 2;
  c.ffn_mult = 2;
  c.memory_layer_index = 1;
  c.max_seq_len = 10;
  c.memory.mem_size = 64;
  c.memory.topk = 4;
  c.memory.n_heads = 2;
  c.memory.value_dim = 16;
  c.memory.key_dim = 8;
  c.seed = 1;
  return c;
}

TEST(ModelConfig, Validation) {
  auto c = small_config();
  c.vocab_size = 0;
  EXPECT_THROW(init_model<float>(c), ConfigError);
  c = small_config();
  c.memory_layer_index = 3;
  EXPECT_THROW(init_model<float>(c), ConfigError);
  c = small_config();
  c.n_attn_heads = 3;
  EXPECT_THROW(init_model<float>(c), ConfigError);
}

TEST(Model, SameSeedBitIdentical) {
  auto a = init_model<float>(small_config());
  auto b = init_model<float>(small_config());
  auto pa = a.parameters();
  auto pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->id, pb[i]->id);
    EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->id;
  }
  auto c = small_config();
  c.seed = 2;
  auto other = init_model<float>(c);
  EXPECT_NE(other.token_embedding.value, a.token_embedding.value);
}

TEST(Model, ParameterCountClosedFormDeskConfig) {
  ModelConfig c;  // desk defaults
  auto m = init_model<float>(c);
  const std::size_t d = 64, V = 512, L = 4, S = 32, f = 4 * 64;
  const std::size_t N = 16384, side = 128, kd = 32, dv = 64, H = 2;
  const std::size_t attn = L * (4 * d * d + 4 * d);
  const std::size_t ffn = (L - 1) * (2 * d * f);
  const std::size_t memory = H * (d * kd + 2 * side * kd / 2) + N * dv + d * dv + dv * d;
  const std::size_t expected = V * d + S * d + attn + ffn + memory + 2 * d;
  EXPECT_EQ(m.parameter_count(), expected);
  std::size_t blocks_with_ffn = 0;
  for (const auto& b : m.blocks) blocks_with_ffn += b.has_ffn;
  EXPECT_EQ(blocks_with_ffn, L - 1);
  EXPECT_FALSE(m.blocks[2].has_ffn);
}

TEST(Model, ResidualProjectionInitScale) {
  ModelConfig c;
  auto m = init_model<double>(c);
  auto stddev = [](const Tensor<double>& t) {
    double s = 0, s2 = 0;
    for (double v : t.data()) s += v, s2 += v * v;
    const double n = static_cast<double>(t.size());
    return std::sqrt(s2 / n - (s / n) * (s / n));
  };
  EXPECT_NEAR(stddev(m.blocks[0].wo.value), 0.02 / 2.0, 0.001);
  EXPECT_NEAR(stddev(m.blocks[0].wq.value), 0.02, 0.002);
}

TEST(Batch, MakeBatchMasks) {
  std::vector<std::vector<std::uint32_t>> seqs{{1, 5, 6}, {1, 7}};
  Batch b = make_batch(seqs, 4);
  EXPECT_EQ(b.tokens, (std::vector<std::uint32_t>{1, 5, 6, 0, 1, 7, 0, 0}));
  EXPECT_EQ(b.pad_mask, (std::vector<std::uint8_t>{1, 1, 1, 0, 1, 1, 0, 0}));
  EXPECT_EQ(b.loss_mask, (std::vector<std::uint8_t>{0, 1, 1, 0, 0, 1, 0, 0}));
  EXPECT_EQ(b.used_length(), 3u);
  for (std::size_t i = 0; i < b.tokens.size(); ++i) EXPECT_LE(b.loss_mask[i], b.pad_mask[i]);
  std::vector<std::vector<std::uint32_t>> too_long{{1, 2, 3, 4, 5}};
  EXPECT_THROW(make_batch(too_long, 4), LengthError);
}

TEST(Model, OverlongSequenceIsLengthError) {
  auto m = init_model<float>(small_config());
  std::vector<std::vector<std::uint32_t>> seqs{std::vector<std::uint32_t>(12, 3)};
  EXPECT_THROW(forward_loss(m, make_batch(seqs, 12), false), LengthError);
}

TEST(Model, IdenticalRowsGiveIdenticalLosses) {
  auto m = init_model<double>(small_config());
  std::vector<std::vector<std::uint32_t>> one{{1, 4, 9, 2}};
  std::vector<std::vector<std::uint32_t>> three{{1, 4, 9, 2}, {1, 4, 9, 2}, {1, 4, 9, 2}};
  const double l1 = forward_loss(m, make_batch(one, 6), false).loss;
  const double l3 = forward_loss(m, make_batch(three, 6), false).loss;
  EXPECT_NEAR(l1, l3, 1e-14);
  auto logits = forward_logits(m, make_batch(three, 6));
  const std::size_t S = logits.rows() / 3;
  for (std::size_t p = 0; p < S * 40; ++p) {
    EXPECT_EQ(logits[p], logits[S * 40 + p]);
    EXPECT_EQ(logits[p], logits[2 * S * 40 + p]);
  }
}

TEST(Model, PadSuffixDoesNotAffectLoss) {
  auto m = init_model<double>(small_config());
  std::vector<std::vector<std::uint32_t>> seqs{{1, 4, 9, 2}, {1, 8}};
  Batch b = make_batch(seqs, 8);
  const double base = forward_loss(m, b, false).loss;
  // Perturb tokens at padded positions.
  for (std::size_t i = 0; i < b.tokens.size(); ++i) {
    if (!b.pad_mask[i]) b.tokens[i] = 17;
  }
  EXPECT_EQ(forward_loss(m, b, false).loss, base);
}

TEST(Model, RecordingDoesNotChangeLoss) {
  auto m = init_model<float>(small_config());
  std::vector<std::vector<std::uint32_t>> seqs{{1, 4, 9, 2, 3}, {1, 8, 11}};
  Batch b = make_batch(seqs, 8);
  auto with = forward_loss(m, b, true);
  auto without = forward_loss(m, b, false);
  EXPECT_EQ(with.loss, without.loss);
  ASSERT_TRUE(with.accesses.has_value());
  EXPECT_FALSE(without.accesses.has_value());
  EXPECT_EQ(with.accesses->positions.size(), 8u);
}

TEST(Model, Causality) {
  auto m = init_model<double>(small_config());
  std::vector<std::vector<std::uint32_t>> seqs{{1, 4, 9, 2, 5, 6, 7}};
  auto base = forward_logits(m, make_batch(seqs, 7));
  for (std::size_t p = 1; p < 7; ++p) {
    auto changed = seqs;
    changed[0][p] = (changed[0][p] + 13) % 40;
    auto logits = forward_logits(m, make_batch(changed, 7));
    for (std::size_t q = 0; q < p; ++q) {
      for (std::size_t v = 0; v < 40; ++v) ASSERT_EQ(logits(q, v), base(q, v)) << "p=" << p << " q=" << q;
    }
  }
}

TEST(Model, TrimmedBatchMatchesFullLength) {
  auto m = init_model<double>(small_config());
  std::vector<std::vector<std::uint32_t>> seqs{{1, 4, 9}, {1, 2}};
  auto short_logits = forward_logits(m, make_batch(seqs, 3));
  auto long_logits = forward_logits(m, make_batch(seqs, 10));
  ASSERT_EQ(long_logits.rows(), 20u);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t v = 0; v < 40; ++v) ASSERT_EQ(short_logits(b * 3 + p, v), long_logits(b * 10 + p, v));
    }
  }
}

TEST(GreedyAnswer, EdgeCases) {
  auto m = init_model<float>(small_config());
  std::vector<std::uint32_t> prompt{1, 3, 5};
  EXPECT_TRUE(greedy_answer(m, prompt, 0).empty());
  auto ans = greedy_answer(m, prompt, 3);
  ASSERT_EQ(ans.size(), 3u);
  for (auto t : ans) EXPECT_LT(t, 40u);
  EXPECT_EQ(ans, greedy_answer(m, prompt, 3));
  EXPECT_THROW(greedy_answer(m, prompt, 8), LengthError);
}

TEST(GreedyAnswer, BatchedMatchesSingle) {
  auto m = init_model<float>(small_config());
  std::vector<std::vector<std::uint32_t>> prompts{{1, 3, 5}, {1, 7}, {1, 2, 3, 4, 5}};
  auto batched = greedy_answers(m, std::span<const std::vector<std::uint32_t>>(prompts), 2);
  for (std::size_t i = 0; i < prompts.size(); ++i) EXPECT_EQ(batched[i], greedy_answer(m, prompts[i], 2));
}

TEST(Model, OverfitOneFact) {
  auto m = init_model<float>(small_config());
  // A single fact: BOS s r -> o; question shares the prefix.
  std::vector<std::vector<std::uint32_t>> seqs{{1, 20, 21, 30}};
  Batch b = make_batch(seqs, 4);
  OptimizerConfig opt;
  opt.kind = OptimizerKind::adamw;
  opt.lr = 1e-2;
  OptimizerState<float> state;
  double loss = 0.0;
  for (int i = 0; i < 200; ++i) loss = full_step(m, b, opt, state).loss;
  EXPECT_LT(forward_loss(m, b, false).loss, 0.01);
  EXPECT_LT(loss, 0.05);
  std::vector<std::uint32_t> prompt{1, 20, 21};
  EXPECT_EQ(greedy_answer(m, prompt, 1), (std::vector<std::uint32_t>{30}));
}

}  // namespace
}  // namespace smf
