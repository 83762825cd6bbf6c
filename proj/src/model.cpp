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

#include "smf/model.hpp"

#include <algorithm>
#include <cmath>

#include "smf/ops.hpp"

namespace smf {

void ModelConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (d_model == 0) throw ConfigError("d_model must be positive");
  if (n_layers == 0) throw ConfigError("n_layers must be positive");
  if (n_attn_heads == 0 || d_model % n_attn_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_attn_heads " +
                      std::to_string(n_attn_heads));
  }
  if (ffn_mult == 0) throw ConfigError("ffn_mult must be positive");
  if (memory_layer_index >= n_layers) {
    throw ConfigError("memory_layer_index " + std::to_string(memory_layer_index) + " must be below n_layers " +
                      std::to_string(n_layers));
  }
  if (max_seq_len < 2) throw ConfigError("max_seq_len must be at least 2");
  memory.validate();
}

void Batch::validate() const {
  const std::size_t n = batch * seq;
  if (batch == 0 || seq == 0) throw ShapeError("batch must have positive size and length");
  if (tokens.size() != n || loss_mask.size() != n || pad_mask.size() != n) {
    throw ShapeError("batch arrays do not match [" + std::to_string(batch) + "x" + std::to_string(seq) + "]");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (loss_mask[i] && !pad_mask[i]) throw ContractError("loss_mask marks a padding position");
  }
}

std::size_t Batch::used_length() const {
  std::size_t used = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t p = seq; p-- > 0;) {
      if (pad_mask[b * seq + p]) {
        used = std::max(used, p + 1);
        break;
      }
    }
  }
  return std::max<std::size_t>(used, 1);
}

Batch make_batch(std::span<const std::vector<std::uint32_t>> sequences, std::size_t seq, std::uint32_t pad_token) {
  Batch b;
  b.batch = sequences.size();
  b.seq = seq;
  b.tokens.assign(b.batch * seq, pad_token);
  b.loss_mask.assign(b.batch * seq, 0);
  b.pad_mask.assign(b.batch * seq, 0);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& s = sequences[i];
    if (s.size() > seq) {
      throw LengthError("sequence of " + std::to_string(s.size()) + " tokens exceeds batch length " +
                        std::to_string(seq));
    }
    for (std::size_t p = 0; p < s.size(); ++p) {
      b.tokens[i * seq + p] = s[p];
      b.pad_mask[i * seq + p] = 1;
      b.loss_mask[i * seq + p] = p > 0 ? 1 : 0;
    }
  }
  return b;
}

template <typename T>
std::vector<Parameter<T>*> TransformerModel<T>::parameters() {
  std::vector<Parameter<T>*> out{&token_embedding, &position_embedding};
  for (auto& blk : blocks) {
    for (auto* p : {&blk.ln1_gain, &blk.ln1_bias, &blk.wq, &blk.wk, &blk.wv, &blk.wo, &blk.ln2_gain, &blk.ln2_bias}) {
      out.push_back(p);
    }
    if (blk.has_ffn) {
      out.push_back(&blk.ffn_in);
      out.push_back(&blk.ffn_out);
    }
  }
  for (auto* p : memory.parameters()) out.push_back(p);
  out.push_back(&final_gain);
  out.push_back(&final_bias);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> TransformerModel<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (auto* p : const_cast<TransformerModel&>(*this).parameters()) out.push_back(p);
  return out;
}

template <typename T>
Parameter<T>* TransformerModel<T>::find(const std::string& id) {
  for (auto* p : parameters()) {
    if (p->id == id) return p;
  }
  return nullptr;
}

template <typename T>
std::size_t TransformerModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

namespace {

template <typename U, typename T>
Parameter<U> cast_param(const Parameter<T>& p) {
  Parameter<U> out(p.id, p.value.template cast<U>());
  out.trainable = p.trainable;
  return out;
}

}  // namespace

template <typename T>
template <typename U>
TransformerModel<U> TransformerModel<T>::cast() const {
  TransformerModel<U> m;
  m.config = config;
  m.token_embedding = cast_param<U>(token_embedding);
  m.position_embedding = cast_param<U>(position_embedding);
  for (const auto& blk : blocks) {
    TransformerBlock<U> b;
    b.ln1_gain = cast_param<U>(blk.ln1_gain);
    b.ln1_bias = cast_param<U>(blk.ln1_bias);
    b.wq = cast_param<U>(blk.wq);
    b.wk = cast_param<U>(blk.wk);
    b.wv = cast_param<U>(blk.wv);
    b.wo = cast_param<U>(blk.wo);
    b.ln2_gain = cast_param<U>(blk.ln2_gain);
    b.ln2_bias = cast_param<U>(blk.ln2_bias);
    b.has_ffn = blk.has_ffn;
    if (blk.has_ffn) {
      b.ffn_in = cast_param<U>(blk.ffn_in);
      b.ffn_out = cast_param<U>(blk.ffn_out);
    }
    m.blocks.push_back(std::move(b));
  }
  m.memory.config = memory.config;
  for (std::size_t h = 0; h < memory.query.size(); ++h) {
    m.memory.query.push_back(cast_param<U>(memory.query[h]));
    m.memory.keys1.push_back(cast_param<U>(memory.keys1[h]));
    m.memory.keys2.push_back(cast_param<U>(memory.keys2[h]));
  }
  m.memory.values = cast_param<U>(memory.values);
  m.memory.gate_in = cast_param<U>(memory.gate_in);
  m.memory.gate_out = cast_param<U>(memory.gate_out);
  m.final_gain = cast_param<U>(final_gain);
  m.final_bias = cast_param<U>(final_bias);
  return m;
}

namespace {

template <typename T>
Tensor<T> normal_matrix(CounterRng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Tensor<T> t = Tensor<T>::zeros(rows, cols);
  for (auto& x : t.data()) x = static_cast<T>(rng.normal() * stddev);
  return t;
}

template <typename T>
Tensor<T> constant_row(std::size_t cols, T value) {
  Tensor<T> t = Tensor<T>::zeros(1, cols);
  t.fill(value);
  return t;
}

}  // namespace

template <typename T>
TransformerModel<T> init_model(const ModelConfig& config) {
  config.validate();
  constexpr double kStd = 0.02;
  const double residual_std = kStd / std::sqrt(static_cast<double>(config.n_layers));
  const std::size_t d = config.d_model, ffn = config.d_model * config.ffn_mult;
  CounterRng rng(config.seed, 0x6d6f64656c);

  TransformerModel<T> m;
  m.config = config;
  m.token_embedding = Parameter<T>("tok_emb", normal_matrix<T>(rng, config.vocab_size, d, kStd));
  m.position_embedding = Parameter<T>("pos_emb", normal_matrix<T>(rng, config.max_seq_len, d, kStd));
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string prefix = "block" + std::to_string(l);
    TransformerBlock<T> b;
    b.ln1_gain = Parameter<T>(prefix + ".ln1.gain", constant_row<T>(d, T{1}));
    b.ln1_bias = Parameter<T>(prefix + ".ln1.bias", constant_row<T>(d, T{0}));
    b.wq = Parameter<T>(prefix + ".attn.wq", normal_matrix<T>(rng, d, d, kStd));
    b.wk = Parameter<T>(prefix + ".attn.wk", normal_matrix<T>(rng, d, d, kStd));
    b.wv = Parameter<T>(prefix + ".attn.wv", normal_matrix<T>(rng, d, d, kStd));
    b.wo = Parameter<T>(prefix + ".attn.wo", normal_matrix<T>(rng, d, d, residual_std));
    b.ln2_gain = Parameter<T>(prefix + ".ln2.gain", constant_row<T>(d, T{1}));
    b.ln2_bias = Parameter<T>(prefix + ".ln2.bias", constant_row<T>(d, T{0}));
    b.has_ffn = l != config.memory_layer_index;
    if (b.has_ffn) {
      b.ffn_in = Parameter<T>(prefix + ".ffn.in", normal_matrix<T>(rng, d, ffn, kStd));
      b.ffn_out = Parameter<T>(prefix + ".ffn.out", normal_matrix<T>(rng, ffn, d, residual_std));
    }
    m.blocks.push_back(std::move(b));
  }
  m.memory = init_memory_params<T>(config.memory, d, residual_std, rng, "memory");
  m.final_gain = Parameter<T>("final.gain", constant_row<T>(d, T{1}));
  m.final_bias = Parameter<T>("final.bias", constant_row<T>(d, T{0}));
  return m;
}

namespace {

template <typename T, typename P, typename Lora>
Var linear(Graph<T>& g, Var x, P& weight, Lora* lora) {
  Var out = matmul(g, x, g.parameter(weight));
  if (lora == nullptr) return out;
  auto* ad = lora->find(weight.id);
  if (ad == nullptr) return out;
  Var low = matmul(g, matmul(g, x, g.parameter(ad->a)), g.parameter(ad->b));
  return add(g, out, scale(g, low, ad->scale));
}

template <typename T, typename Model, typename Lora>
ForwardPass<T> build_forward_impl(Graph<T>& g, Model& model, const Batch& batch, Lora* lora, bool with_loss) {
  batch.validate();
  const auto& cfg = model.config;
  if (batch.seq > cfg.max_seq_len) {
    throw LengthError("sequence length " + std::to_string(batch.seq) + " exceeds max_seq_len " +
                      std::to_string(cfg.max_seq_len));
  }
  for (auto t : batch.tokens) {
    if (t >= cfg.vocab_size) throw ContractError("token id " + std::to_string(t) + " outside vocabulary");
  }
  const std::size_t B = batch.batch, S = batch.used_length();
  std::vector<std::uint32_t> ids(B * S), pos(B * S);
  std::vector<std::uint8_t> pad(B * S);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < S; ++p) {
      ids[b * S + p] = batch.tokens[b * batch.seq + p];
      pad[b * S + p] = batch.pad_mask[b * batch.seq + p];
      pos[b * S + p] = static_cast<std::uint32_t>(p);
    }
  }

  ForwardPass<T> out;
  out.used_len = S;
  Var tok_table = g.parameter(model.token_embedding);
  Var h = add(g, gather_rows(g, tok_table, std::span<const std::uint32_t>(ids)),
              gather_rows(g, g.parameter(model.position_embedding), std::span<const std::uint32_t>(pos)));
  const AttentionShape shape{B, S, cfg.n_attn_heads};
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    auto& blk = model.blocks[l];
    Var a = layer_norm(g, h, g.parameter(blk.ln1_gain), g.parameter(blk.ln1_bias));
    Var q = linear(g, a, blk.wq, lora);
    Var k = linear(g, a, blk.wk, lora);
    Var v = linear(g, a, blk.wv, lora);
    Var att = causal_attention(g, q, k, v, shape, std::span<const std::uint8_t>(pad));
    h = add(g, h, linear(g, att, blk.wo, lora));
    Var x = layer_norm(g, h, g.parameter(blk.ln2_gain), g.parameter(blk.ln2_bias));
    if (blk.has_ffn) {
      Var hidden = silu(g, linear(g, x, blk.ffn_in, lora));
      h = add(g, h, linear(g, hidden, blk.ffn_out, lora));
    } else {
      auto mem = memory_forward(g, model.memory, x, std::span<const std::uint8_t>(pad), S);
      h = add(g, h, mem.output);
      out.record = std::move(mem.record);
    }
  }
  Var hf = layer_norm(g, h, g.parameter(model.final_gain), g.parameter(model.final_bias));
  out.logits = matmul_nt(g, hf, tok_table);

  if (with_loss) {
    std::vector<std::uint32_t> targets(B * S, 0);
    std::vector<std::uint8_t> mask(B * S, 0);
    bool any = false;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t p = 0; p + 1 < S; ++p) {
        const std::size_t src = b * batch.seq + p + 1;
        if (!batch.loss_mask[src]) continue;
        targets[b * S + p] = batch.tokens[src];
        mask[b * S + p] = 1;
        any = true;
      }
    }
    if (any) {
      out.loss = cross_entropy_masked(g, out.logits, std::span<const std::uint32_t>(targets),
                                      std::span<const std::uint8_t>(mask));
      out.has_loss = true;
    } else {
      throw EmptyLossError("batch has no loss targets");
    }
  }
  return out;
}

}  // namespace

template <typename T>
ForwardPass<T> build_forward(Graph<T>& g, TransformerModel<T>& model, const Batch& batch, LoraAdapters<T>* lora,
                             bool with_loss) {
  return build_forward_impl(g, model, batch, lora, with_loss);
}

template <typename T>
ForwardPass<T> build_forward(Graph<T>& g, const TransformerModel<T>& model, const Batch& batch,
                             const LoraAdapters<T>* lora, bool with_loss) {
  return build_forward_impl(g, model, batch, lora, with_loss);
}

template <typename T>
LossResult forward_loss(const TransformerModel<T>& model, const Batch& batch, bool record_accesses,
                        const LoraAdapters<T>* lora) {
  Graph<T> g(false);
  auto pass = build_forward(g, model, batch, lora, true);
  LossResult out;
  out.loss = static_cast<double>(g.value(pass.loss).item());
  if (record_accesses) out.accesses = std::move(pass.record);
  return out;
}

template <typename T>
Tensor<T> forward_logits(const TransformerModel<T>& model, const Batch& batch, const LoraAdapters<T>* lora) {
  Graph<T> g(false);
  auto pass = build_forward(g, model, batch, lora, false);
  const auto& lv = g.value(pass.logits);
  const std::size_t V = lv.cols(), S = pass.used_len;
  Tensor<T> out = Tensor<T>::zeros(batch.batch * batch.seq, V);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    for (std::size_t p = 0; p < S; ++p) std::copy_n(lv.ptr() + (b * S + p) * V, V, out.ptr() + (b * batch.seq + p) * V);
  }
  return out;
}

template <typename T>
std::vector<std::vector<std::uint32_t>> greedy_answers(const TransformerModel<T>& model,
                                                       std::span<const std::vector<std::uint32_t>> prompts,
                                                       std::size_t answer_len, const LoraAdapters<T>* lora) {
  std::vector<std::vector<std::uint32_t>> answers(prompts.size());
  if (answer_len == 0 || prompts.empty()) return answers;
  const std::size_t max_len = model.config.max_seq_len;
  std::vector<std::vector<std::uint32_t>> running(prompts.begin(), prompts.end());
  std::size_t longest = 0;
  for (const auto& p : running) {
    if (p.empty()) throw ContractError("greedy_answer needs a non-empty prompt");
    if (p.size() + answer_len > max_len) {
      throw LengthError("prompt of " + std::to_string(p.size()) + " tokens plus " + std::to_string(answer_len) +
                        " answer tokens exceeds max_seq_len " + std::to_string(max_len));
    }
    longest = std::max(longest, p.size());
  }
  for (std::size_t step = 0; step < answer_len; ++step) {
    Batch batch = make_batch(std::span<const std::vector<std::uint32_t>>(running), longest + step);
    Graph<T> g(false);
    auto pass = build_forward(g, model, batch, lora, false);
    const auto& lv = g.value(pass.logits);
    const std::size_t V = lv.cols(), S = pass.used_len;
    for (std::size_t i = 0; i < running.size(); ++i) {
      const T* row = lv.ptr() + (i * S + running[i].size() - 1) * V;
      std::uint32_t best = 0;
      for (std::uint32_t c = 1; c < V; ++c) {
        if (row[c] > row[best]) best = c;
      }
      answers[i].push_back(best);
      running[i].push_back(best);
    }
  }
  return answers;
}

template <typename T>
std::vector<std::uint32_t> greedy_answer(const TransformerModel<T>& model, std::span<const std::uint32_t> prompt,
                                         std::size_t answer_len, const LoraAdapters<T>* lora) {
  if (prompt.size() + answer_len > model.config.max_seq_len) {
    throw LengthError("prompt of " + std::to_string(prompt.size()) + " tokens plus " + std::to_string(answer_len) +
                      " answer tokens exceeds max_seq_len " + std::to_string(model.config.max_seq_len));
  }
  if (answer_len == 0) return {};
  std::vector<std::vector<std::uint32_t>> one{std::vector<std::uint32_t>(prompt.begin(), prompt.end())};
  return greedy_answers(model, std::span<const std::vector<std::uint32_t>>(one), answer_len, lora).front();
}

#define SMF_INSTANTIATE_MODEL(T)                                                                                   \
  template class TransformerModel<T>;                                                                              \
  template TransformerModel<T> init_model<T>(const ModelConfig&);                                                  \
  template ForwardPass<T> build_forward<T>(Graph<T>&, TransformerModel<T>&, const Batch&, LoraAdapters<T>*, bool); \
  template ForwardPass<T> build_forward<T>(Graph<T>&, const TransformerModel<T>&, const Batch&,                    \
                                           const LoraAdapters<T>*, bool);                                          \
  template LossResult forward_loss<T>(const TransformerModel<T>&, const Batch&, bool, const LoraAdapters<T>*);     \
  template Tensor<T> forward_logits<T>(const TransformerModel<T>&, const Batch&, const LoraAdapters<T>*);          \
  template std::vector<std::uint32_t> greedy_answer<T>(const TransformerModel<T>&, std::span<const std::uint32_t>, \
                                                       std::size_t, const LoraAdapters<T>*);                       \
  template std::vector<std::vector<std::uint32_t>> greedy_answers<T>(                                              \
      const TransformerModel<T>&, std::span<const std::vector<std::uint32_t>>, std::size_t, const LoraAdapters<T>*);

SMF_INSTANTIATE_MODEL(float)
SMF_INSTANTIATE_MODEL(double)
template TransformerModel<double> TransformerModel<float>::cast<double>() const;
template TransformerModel<float> TransformerModel<double>::cast<float>() const;
template TransformerModel<float> TransformerModel<float>::cast<float>() const;
template TransformerModel<double> TransformerModel<double>::cast<double>() const;

}  // namespace smf
