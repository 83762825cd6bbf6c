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
#include <set>

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
  c.memory.mem_size = 256;
  c.memory.topk = 4;
  c.memory.n_heads = 2;
  c.memory.value_dim = 16;
  c.memory.key_dim = 8;
  c.seed = 4;
  return c;
}

Batch fact_batch() {
  std::vector<std::vector<std::uint32_t>> seqs{{1, 10, 11, 12, 30}, {1, 13, 10, 11, 12, 30}, {1, 14, 10, 11, 30}};
  return make_batch(seqs, 8);
}

template <typename T>
std::vector<Tensor<T>> snapshot(TransformerModel<T>& m) {
  std::vector<Tensor<T>> out;
  for (auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

template <typename T>
BackgroundIndexStore some_store(const TransformerModel<T>& m) {
  std::vector<std::vector<std::uint32_t>> a{{1, 20, 21, 22, 23}, {1, 24, 25}};
  std::vector<std::vector<std::uint32_t>> b{{1, 10, 26, 27}, {1, 28, 29, 12}};
  std::vector<Batch> batches{make_batch(a, 8), make_batch(b, 8)};
  return build_background_store<T>(batches, m, "bg");
}

// Fresh embeddings at std 0.02 cap the tied-output logit range, so methods
// that freeze them cannot fit anything. Widen them first.
template <typename T>
void widen_embeddings(TransformerModel<T>& m) {
  for (auto& x : m.token_embedding.value.data()) x *= T{50};
}

OptimizerConfig sgd(double lr) {
  OptimizerConfig o;
  o.kind = OptimizerKind::sgd;
  o.lr = lr;
  return o;
}

TEST(SparseStep, OnlySelectedValueRowsChange) {
  auto m = init_model<float>(small_config());
  auto store = some_store(m);
  auto before = snapshot(m);
  OptimizerState<float> state;
  auto report = sparse_memory_step(m, fact_batch(), store, 5, sgd(1.0), state);
  ASSERT_EQ(report.trained_indices.size(), 5u);
  EXPECT_EQ(report.trainable_count, 5u);
  std::set<std::uint32_t> trained(report.trained_indices.begin(), report.trained_indices.end());
  auto params = m.parameters();
  std::size_t changed_rows = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i] != &m.memory.values) {
      EXPECT_EQ(params[i]->value, before[i]) << params[i]->id;
      continue;
    }
    const auto& v = params[i]->value;
    for (std::size_t r = 0; r < v.rows(); ++r) {
      bool same = true;
      for (std::size_t c = 0; c < v.cols(); ++c) same &= v(r, c) == before[i](r, c);
      if (!trained.count(static_cast<std::uint32_t>(r))) {
        EXPECT_TRUE(same) << "row " << r;
      } else {
        changed_rows += !same;
      }
    }
  }
  EXPECT_EQ(changed_rows, 5u);
  for (auto* p : params) EXPECT_TRUE(p->trainable) << p->id;
}

TEST(SparseStep, MaskDoesNotChangeForwardLoss) {
  auto m = init_model<float>(small_config());
  const Batch b = fact_batch();
  Graph<float> g1(true);
  const float plain = g1.value(build_forward(g1, m, b).loss).item();
  m.memory.values.grad_row_mask.assign(m.memory.values.value.rows(), 0);
  m.memory.values.grad_row_mask[3] = 1;
  Graph<float> g2(true);
  const float masked = g2.value(build_forward(g2, m, b).loss).item();
  EXPECT_EQ(plain, masked);
  auto store = some_store(m);
  m.memory.values.grad_row_mask.clear();
  OptimizerState<float> state;
  EXPECT_EQ(static_cast<float>(sparse_memory_step(m, b, store, 3, sgd(0.5), state).loss), plain);
}

TEST(SparseStep, SingleRowSet) {
  auto m = init_model<double>(small_config());
  auto store = some_store(m);
  auto before = m.memory.values.value;
  OptimizerState<double> state;
  auto report = sparse_memory_step(m, fact_batch(), store, 1, sgd(1.0), state);
  ASSERT_EQ(report.trained_indices.size(), 1u);
  const auto row = report.trained_indices[0];
  for (std::size_t r = 0; r < before.rows(); ++r) {
    if (r == row) continue;
    for (std::size_t c = 0; c < before.cols(); ++c) ASSERT_EQ(m.memory.values.value(r, c), before(r, c));
  }
}

TEST(SparseStep, ZeroTIsConfigError) {
  auto m = init_model<float>(small_config());
  auto store = some_store(m);
  OptimizerState<float> state;
  EXPECT_THROW(sparse_memory_step(m, fact_batch(), store, 0, sgd(1.0), state), ConfigError);
  EXPECT_THROW(memory_tf_only_step(m, fact_batch(), 0, sgd(1.0), state), ConfigError);
}

TEST(MethodNesting, SparseWithAllIndicesEqualsMemoryAll) {
  auto a = init_model<double>(small_config());
  auto b = init_model<double>(small_config());
  // Empty background store: every index has the same IDF, so TF-IDF ranks like TF.
  auto store = BackgroundIndexStore({}, 1, "empty");
  OptimizerState<double> sa, sb;
  auto ra = sparse_memory_step(a, fact_batch(), store, 100000, sgd(2.0), sa);
  auto rb = memory_all_step(b, fact_batch(), sgd(2.0), sb);
  EXPECT_EQ(ra.trainable_count, rb.trainable_count);
  EXPECT_EQ(std::set<std::uint32_t>(ra.trained_indices.begin(), ra.trained_indices.end()),
            std::set<std::uint32_t>(rb.trained_indices.begin(), rb.trained_indices.end()));
  EXPECT_EQ(a.memory.values.value, b.memory.values.value);
}

TEST(MethodNesting, MemoryAllGradientMatchesUnmaskedValuesGradient) {
  auto m = init_model<double>(small_config());
  const Batch batch = fact_batch();
  for (auto* p : m.parameters()) {
    p->trainable = p == &m.memory.values;
    p->zero_grad();
  }
  {
    Graph<double> g(true);
    g.backward(build_forward(g, m, batch).loss);
  }
  const Tensor<double> grad = m.memory.values.grad;
  const Tensor<double> before = m.memory.values.value;
  for (auto* p : m.parameters()) p->trainable = true;
  OptimizerState<double> state;
  memory_all_step(m, batch, sgd(1.0), state);
  for (std::size_t i = 0; i < grad.size(); ++i) EXPECT_EQ(m.memory.values.value[i], before[i] - grad[i]);
}

TEST(MemoryAll, UnaccessedRowsUnchangedAndLossDecreases) {
  auto m = init_model<float>(small_config());
  widen_embeddings(m);
  const Batch batch = fact_batch();
  const auto before = m.memory.values.value;
  OptimizerState<float> state;
  auto first = memory_all_step(m, batch, sgd(10.0), state);
  std::set<std::uint32_t> touched(first.trained_indices.begin(), first.trained_indices.end());
  for (std::size_t r = 0; r < before.rows(); ++r) {
    if (touched.count(static_cast<std::uint32_t>(r))) continue;
    for (std::size_t c = 0; c < before.cols(); ++c) ASSERT_EQ(m.memory.values.value(r, c), before(r, c));
  }
  double last = first.loss;
  for (int i = 0; i < 49; ++i) {
    const double loss = memory_all_step(m, batch, sgd(10.0), state).loss;
    EXPECT_LT(loss, last) << "step " << i + 1;
    last = loss;
  }
  EXPECT_LT(last, first.loss - 0.1);
}

TEST(TfOnlyStep, SelectsHighestCountIndices) {
  auto m = init_model<float>(small_config());
  const Batch batch = fact_batch();
  auto rec = forward_loss(m, batch, true);
  auto counts = count_batch_accesses(std::span<const AccessRecord>(&*rec.accesses, 1));
  auto expect = select_top_t(tf_only_scores(counts), 7);
  OptimizerState<float> state;
  auto report = memory_tf_only_step(m, batch, 7, sgd(1.0), state);
  EXPECT_EQ(report.trained_indices, expect.indices);
}

TEST(FullStep, ZeroLrLeavesParametersUnchanged) {
  auto m = init_model<float>(small_config());
  auto before = snapshot(m);
  OptimizerState<float> state;
  full_step(m, fact_batch(), sgd(0.0), state);
  auto after = snapshot(m);
  EXPECT_EQ(before, after);
}

TEST(FullStep, OverfitsOneBatch) {
  auto m = init_model<float>(small_config());
  OptimizerConfig opt;
  opt.kind = OptimizerKind::adamw;
  opt.lr = 1e-2;
  OptimizerState<float> state;
  std::vector<std::vector<std::uint32_t>> seqs{{1, 10, 11, 12, 30}, {1, 10, 11, 12, 30}};
  Batch b = make_batch(seqs, 8);
  for (int i = 0; i < 200; ++i) full_step(m, b, opt, state);
  EXPECT_LT(forward_loss(m, b, false).loss, 0.01);
}

TEST(FullStep, WeightDecayShrinksUnusedParameter) {
  auto m = init_model<double>(small_config());
  OptimizerConfig opt;
  opt.kind = OptimizerKind::adamw;
  opt.lr = 0.01;
  opt.weight_decay = 0.1;
  OptimizerState<double> state;
  // Token 39 never appears and the output projection is tied, so its row
  // still receives softmax gradient; the position embedding row 9 is
  // never used by an 8-long batch.
  const auto before = m.position_embedding.value;
  for (int step = 1; step <= 3; ++step) {
    full_step(m, fact_batch(), opt, state);
    for (std::size_t c = 0; c < before.cols(); ++c) {
      EXPECT_DOUBLE_EQ(m.position_embedding.value(9, c), before(9, c) * std::pow(1 - 0.01 * 0.1, step));
    }
  }
}

TEST(Lora, ZeroInitLeavesOutputsIdentical) {
  auto m = init_model<float>(small_config());
  LoraConfig cfg;
  cfg.rank = 3;
  auto adapters = lora_attach(m, cfg, 1);
  EXPECT_EQ(adapters.by_weight.size(), 3u * 4 + 2u * 2);
  const Batch b = fact_batch();
  EXPECT_EQ(forward_logits(m, b, &adapters), forward_logits(m, b));
  cfg.target = LoraTarget::attention_only;
  EXPECT_EQ(lora_attach(m, cfg, 1).by_weight.size(), 3u * 4);
}

TEST(Lora, RankAboveMinDimIsConfigError) {
  auto m = init_model<float>(small_config());
  LoraConfig cfg;
  cfg.rank = 17;
  EXPECT_THROW(lora_attach(m, cfg, 1), ConfigError);
}

TEST(Lora, OnlyAdaptersChange) {
  auto m = init_model<float>(small_config());
  LoraConfig cfg;
  cfg.rank = 2;
  auto adapters = lora_attach(m, cfg, 1);
  auto before = snapshot(m);
  OptimizerConfig opt;
  opt.kind = OptimizerKind::adamw;
  opt.lr = 1e-2;
  OptimizerState<float> state;
  lora_step(m, adapters, fact_batch(), opt, state);
  EXPECT_EQ(snapshot(m), before);
  bool any_b_moved = false;
  for (const auto& [_, ad] : adapters.by_weight) {
    for (float x : ad.b.value.data()) any_b_moved |= x != 0.0f;
  }
  EXPECT_TRUE(any_b_moved);
}

TEST(Lora, FullRankOverfits) {
  auto c = small_config();
  auto m = init_model<float>(c);
  widen_embeddings(m);
  LoraConfig cfg;
  cfg.rank = 16;
  cfg.alpha = 16;
  auto adapters = lora_attach(m, cfg, 2);
  OptimizerConfig opt;
  opt.kind = OptimizerKind::adamw;
  opt.lr = 2e-2;
  OptimizerState<float> state;
  std::vector<std::vector<std::uint32_t>> seqs{{1, 10, 11, 12, 30}};
  Batch b = make_batch(seqs, 8);
  for (int i = 0; i < 200; ++i) lora_step(m, adapters, b, opt, state);
  EXPECT_LT(forward_loss(m, b, false, &adapters).loss, 0.05);
}

TEST(Trainer, DeterministicTrajectories) {
  MethodSpec spec;
  spec.method = Method::sparse_memory;
  spec.t = 6;
  spec.optimizer = sgd(1.5);
  auto run = [&] {
    auto m = init_model<float>(small_config());
    auto store = some_store(m);
    Trainer<float> trainer(m, spec, &store, 3);
    std::vector<std::string> log;
    for (int i = 0; i < 5; ++i) log.push_back(trainer.step(fact_batch()).to_json());
    return std::make_pair(log, m.memory.values.value);
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(MethodSpec, Validation) {
  MethodSpec s;
  s.method = Method::sparse_memory;
  EXPECT_THROW(s.validate(), ConfigError);
  s.t = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.t = 4;
  EXPECT_NO_THROW(s.validate());
  s.method = Method::full;
  EXPECT_THROW(s.validate(), ConfigError);
  s.t.reset();
  EXPECT_NO_THROW(s.validate());
  s.method = Method::lora;
  EXPECT_THROW(s.validate(), ConfigError);
  s.lora = LoraConfig{};
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(parse_method("memory_tf_only"), Method::memory_tf_only);
  EXPECT_THROW(parse_method("nope"), ConfigError);
}

TEST(StepReport, JsonRecord) {
  StepReport r;
  r.step = 3;
  r.method = Method::full;
  r.loss = 0.5;
  r.trainable_count = 10;
  r.lr = 0.25;
  EXPECT_EQ(r.to_json(), R"({"step":3,"method":"full","loss":0.5,"trainable":10,"lr":0.25,"grad_norm":0.0})");
}

}  // namespace
}  // namespace smf
