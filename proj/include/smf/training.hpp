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
#include <string>
#include <string_view>
#include <vector>

#include "smf/lora.hpp"
#include "smf/model.hpp"
#include "smf/optim.hpp"
#include "smf/ranking.hpp"

namespace smf {

enum class Method { sparse_memory, memory_all, memory_tf_only, full, lora };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);
std::string_view lora_target_name(LoraTarget t);
LoraTarget parse_lora_target(std::string_view name);

struct MethodSpec {
  Method method = Method::sparse_memory;
  std::optional<std::size_t> t;  // sparse_memory and memory_tf_only only
  OptimizerConfig optimizer;
  std::optional<LoraConfig> lora;

  void validate() const;
  bool trains_memory_values_only() const {
    return method == Method::sparse_memory || method == Method::memory_all || method == Method::memory_tf_only;
  }
};

struct StepReport {
  std::size_t step = 0;
  Method method = Method::sparse_memory;
  double loss = 0.0;
  std::size_t trainable_count = 0;  // value rows for memory methods, scalars otherwise
  double lr = 0.0;
  double grad_norm = 0.0;
  std::vector<std::uint32_t> trained_indices;  // memory methods only

  // One JSON object on a single line.
  std::string to_json() const;
};

template <typename T>
struct OptimizerState {
  AdamWState<T> adamw;
  std::size_t steps = 0;
};

// Trains only the value rows picked by TF-IDF against `store`. Every other
// parameter, and every value row outside the trainable set, is left
// bit-identical. The forward pass is the ordinary unmasked one.
template <typename T>
StepReport sparse_memory_step(TransformerModel<T>& model, const Batch& batch, const BackgroundIndexStore& store,
                              std::size_t t, const OptimizerConfig& opt, OptimizerState<T>& state);

// Same as sparse_memory_step with raw access counts as the ranking.
template <typename T>
StepReport memory_tf_only_step(TransformerModel<T>& model, const Batch& batch, std::size_t t,
                               const OptimizerConfig& opt, OptimizerState<T>& state);

// Trains every accessed value row; keys, queries and gating stay frozen.
template <typename T>
StepReport memory_all_step(TransformerModel<T>& model, const Batch& batch, const OptimizerConfig& opt,
                           OptimizerState<T>& state);

// Dense update of every parameter; the memory value table steps with
// lr * value_lr_scale.
template <typename T>
StepReport full_step(TransformerModel<T>& model, const Batch& batch, const OptimizerConfig& opt,
                     OptimizerState<T>& state, double value_lr_scale = 1.0);

// Adapters on attention projections, plus FFN projections for all_linear.
template <typename T>
LoraAdapters<T> lora_attach(const TransformerModel<T>& model, const LoraConfig& cfg, std::uint64_t seed);

template <typename T>
StepReport lora_step(TransformerModel<T>& model, LoraAdapters<T>& adapters, const Batch& batch,
                     const OptimizerConfig& opt, OptimizerState<T>& state);

// Owns per-run optimizer state and adapters and dispatches on the method.
template <typename T>
class Trainer {
 public:
  Trainer(TransformerModel<T>& model, MethodSpec spec, const BackgroundIndexStore* store, std::uint64_t seed);

  StepReport step(const Batch& batch);

  const MethodSpec& spec() const { return spec_; }
  const LoraAdapters<T>* adapters() const { return adapters_ ? &*adapters_ : nullptr; }

 private:
  TransformerModel<T>& model_;
  MethodSpec spec_;
  const BackgroundIndexStore* store_;
  OptimizerState<T> state_;
  std::optional<LoraAdapters<T>> adapters_;
};

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace smf
