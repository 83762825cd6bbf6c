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

#include <map>
#include <string>
#include <vector>

#include "smf/tensor.hpp"

namespace smf {

enum class LoraTarget { all_linear, attention_only };

struct LoraConfig {
  std::size_t rank = 4;
  double alpha = 4.0;
  LoraTarget target = LoraTarget::all_linear;
  double lr = 1e-3;

  void validate() const {
    if (rank < 1) throw ConfigError("LoRA rank must be at least 1");
  }
};

// Low-rank delta for one weight W [in×out]: W + (alpha/r)·A·B with A [in×r],
// B [r×out]. B starts at zero, so attaching adapters leaves outputs unchanged.
template <typename T>
struct LoraAdapter {
  Parameter<T> a;
  Parameter<T> b;
  T scale{1};
};

template <typename T>
struct LoraAdapters {
  LoraConfig config;
  std::map<std::string, LoraAdapter<T>> by_weight;  // keyed by base Parameter id

  const LoraAdapter<T>* find(const std::string& weight_id) const {
    auto it = by_weight.find(weight_id);
    return it == by_weight.end() ? nullptr : &it->second;
  }
  LoraAdapter<T>* find(const std::string& weight_id) {
    auto it = by_weight.find(weight_id);
    return it == by_weight.end() ? nullptr : &it->second;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& [_, ad] : by_weight) {
      out.push_back(&ad.a);
      out.push_back(&ad.b);
    }
    return out;
  }
};

}  // namespace smf
