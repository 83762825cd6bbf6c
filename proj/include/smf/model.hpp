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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smf/autodiff.hpp"
#include "smf/lora.hpp"
#include "smf/memory_layer.hpp"

namespace smf {

struct ModelConfig {
  std::size_t vocab_size = 512;
  std::size_t d_model = 64;
  std::size_t n_layers = 4;
  std::size_t n_attn_heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t memory_layer_index = 2;
  std::size_t max_seq_len = 32;
  MemoryConfig memory;
  std::uint64_t seed = 0;

  void validate() const;
};

// Token batch laid out [batch × seq], row-major. pad_mask marks real tokens.
// loss_mask[b][p] marks token p as a prediction target (from position p-1),
// and must be a subset of pad_mask.
struct Batch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<std::uint32_t> tokens;
  std::vector<std::uint8_t> loss_mask;
  std::vector<std::uint8_t> pad_mask;

  void validate() const;
  // Length of the shortest prefix that still contains every real token.
  std::size_t used_length() const;
};

// Pads sequences on the right to `seq` tokens; loss on every real token
// after the first.
Batch make_batch(std::span<const std::vector<std::uint32_t>> sequences, std::size_t seq, std::uint32_t pad_token = 0);

template <typename T>
struct TransformerBlock {
  Parameter<T> ln1_gain, ln1_bias;
  Parameter<T> wq, wk, wv, wo;
  Parameter<T> ln2_gain, ln2_bias;
  // Absent (empty id) in the block whose FFN is replaced by the memory layer.
  Parameter<T> ffn_in, ffn_out;
  bool has_ffn = true;
};

template <typename T>
class TransformerModel {
 public:
  ModelConfig config;
  Parameter<T> token_embedding;     // [vocab × d], tied to the output projection
  Parameter<T> position_embedding;  // [max_seq_len × d]
  std::vector<TransformerBlock<T>> blocks;
  MemoryLayerParams<T> memory;
  Parameter<T> final_gain, final_bias;

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  Parameter<T>* find(const std::string& id);
  std::size_t parameter_count() const;

  template <typename U>
  TransformerModel<U> cast() const;
};

template <typename T>
TransformerModel<T> init_model(const ModelConfig& config);

template <typename T>
struct ForwardPass {
  Var logits;        // [batch·used_len × vocab]
  Var loss;          // valid when the batch has loss targets
  bool has_loss = false;
  std::size_t used_len = 0;
  AccessRecord record;
};

// Records the full forward pass on `g`. The batch is trimmed to its used
// length; trailing all-pad columns cannot influence earlier positions.
template <typename T>
ForwardPass<T> build_forward(Graph<T>& g, TransformerModel<T>& model, const Batch& batch,
                             LoraAdapters<T>* lora = nullptr, bool with_loss = true);
template <typename T>
ForwardPass<T> build_forward(Graph<T>& g, const TransformerModel<T>& model, const Batch& batch,
                             const LoraAdapters<T>* lora = nullptr, bool with_loss = true);

struct LossResult {
  double loss = 0.0;
  std::optional<AccessRecord> accesses;
};

template <typename T>
LossResult forward_loss(const TransformerModel<T>& model, const Batch& batch, bool record_accesses,
                        const LoraAdapters<T>* lora = nullptr);

// Logits [batch·seq × vocab] for the untrimmed batch layout (rows past the
// used length are left zero).
template <typename T>
Tensor<T> forward_logits(const TransformerModel<T>& model, const Batch& batch, const LoraAdapters<T>* lora = nullptr);

// Argmax decoding; ties go to the lower token id.
template <typename T>
std::vector<std::uint32_t> greedy_answer(const TransformerModel<T>& model, std::span<const std::uint32_t> prompt,
                                         std::size_t answer_len, const LoraAdapters<T>* lora = nullptr);

// Batched greedy_answer over many prompts; same results as calling it per prompt.
template <typename T>
std::vector<std::vector<std::uint32_t>> greedy_answers(const TransformerModel<T>& model,
                                                       std::span<const std::vector<std::uint32_t>> prompts,
                                                       std::size_t answer_len, const LoraAdapters<T>* lora = nullptr);

}  // namespace smf
