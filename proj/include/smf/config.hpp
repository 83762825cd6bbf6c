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
#include <string>
#include <vector>

#include "json.hpp"
#include "smf/data.hpp"
#include "smf/model.hpp"
#include "smf/training.hpp"

namespace smf {

using Json = nlohmann::ordered_json;

struct PretrainConfig {
  std::size_t steps = 2500;
  std::size_t batch_size = 16;
  std::size_t seq_len = 32;
  double lr = 3e-3;
  std::size_t warmup = 200;
  double weight_decay = 0.0;
  double value_lr_scale = 10.0;  // memory value table lr multiplier
  PretrainMix mix;
  std::size_t background_batches = 100;
  std::size_t eval_every = 500;
  double min_heldout_acc = 0.9;

  void validate() const;
};

enum class BackgroundCorpus { pretrain, filler, stream };

std::string_view background_name(BackgroundCorpus c);
BackgroundCorpus parse_background(std::string_view name);

struct StreamConfig {
  std::size_t batch_size = 16;
  std::size_t seq_len = 32;
  std::size_t paraphrases_per_fact = 16;
  std::size_t steps_per_fact = 4;
  std::size_t eval_every = 50;  // in facts
  std::size_t n_facts = 0;      // 0 streams every fact in the stream set
  BackgroundCorpus background = BackgroundCorpus::pretrain;

  void validate() const;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  DataConfig data;
  PretrainConfig pretrain;
  StreamConfig stream;
  MethodSpec method = default_method();

  static MethodSpec default_method();
  void validate() const;
};

Json to_json(const ExperimentConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const Json& json);
ExperimentConfig load_config(const std::string& path);

// FNV-1a of the canonical (compact, fixed key order) JSON form.
std::uint64_t config_digest(const ExperimentConfig& config);

// Dotted paths of every leaf, e.g. "model.memory.topk".
std::vector<std::string> leaf_paths(const Json& json);
// Parses `text` against the type of the existing leaf at `path`.
void apply_override(Json& json, const std::string& path, const std::string& text);

}  // namespace smf
