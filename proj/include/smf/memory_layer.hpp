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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "smf/autodiff.hpp"
#include "smf/rng.hpp"

namespace smf {

struct MemoryConfig {
  std::size_t mem_size = 16384;  // N, a perfect square
  std::size_t topk = 8;         // k
  std::size_t n_heads = 2;
  std::size_t value_dim = 64;
  std::size_t key_dim = 32;  // even; each half-key has key_dim / 2 entries

  // √N, the number of rows in each half-key table.
  std::size_t side() const;
  void validate() const;
};

template <typename T>
struct TopK {
  std::vector<std::uint32_t> indices;  // flat indices, best first
  std::vector<T> scores;               // descending
};

// Exact top-k over the N = side² composite keys concat(K1[i1], K2[i2]):
// take the top-k of each half, score the k² candidate pairs, keep the best k.
// Ties go to the lower index at both stages, which makes the result equal to
// a full scan ordered by (score desc, flat index asc).
template <typename T>
TopK<T> product_key_topk(std::span<const T> q_half1, std::span<const T> q_half2, const Tensor<T>& keys1,
                         const Tensor<T>& keys2, std::size_t k);

template <typename T>
struct MemoryLayerParams {
  MemoryConfig config;
  std::vector<Parameter<T>> query;  // per head, [d_model × key_dim]
  std::vector<Parameter<T>> keys1;  // per head, [side × key_dim/2]
  std::vector<Parameter<T>> keys2;  // per head, [side × key_dim/2]
  Parameter<T> values;              // [N × value_dim], shared by all heads
  Parameter<T> gate_in;             // W1, [d_model × value_dim]
  Parameter<T> gate_out;            // W2, [value_dim × d_model]

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
};

template <typename T>
MemoryLayerParams<T> init_memory_params(const MemoryConfig& config, std::size_t d_model, double out_std,
                                        CounterRng& rng, const std::string& prefix = "memory");

// Memory accesses of one forward pass, restricted to non-pad positions.
struct AccessRecord {
  struct Position {
    std::uint32_t seq = 0;
    std::uint32_t pos = 0;
    friend bool operator==(const Position&, const Position&) = default;
  };

  std::size_t k = 0;
  std::size_t n_heads = 0;
  std::vector<Position> positions;
  std::vector<std::uint32_t> indices;  // [positions × heads × k]
  std::vector<double> weights;         // softmax weights, same layout

  std::span<const std::uint32_t> indices_at(std::size_t p, std::size_t head) const {
    return {indices.data() + (p * n_heads + head) * k, k};
  }
  std::span<const double> weights_at(std::size_t p, std::size_t head) const {
    return {weights.data() + (p * n_heads + head) * k, k};
  }
};

struct BatchAccessCounts {
  std::map<std::uint32_t, std::uint64_t> counts;

  std::uint64_t total() const;
  bool empty() const { return counts.empty(); }
};

// c(i): how often each flat index was selected, over positions, heads and
// sequences of one batch.
BatchAccessCounts count_batch_accesses(std::span<const AccessRecord> records);

struct MemoryForward {
  Var output;
  AccessRecord record;
};

// Memory block on rows of x ([batch·seq × d_model]):
//   per head: top-k via product keys, s = softmax(selected scores), y_h = s·V_I
//   y = Σ_h y_h;  output = (y ⊙ silu(x W1)) W2
// `pad_mask` has one entry per row; rows with 0 are computed but not recorded.
template <typename T>
MemoryForward memory_forward(Graph<T>& g, MemoryLayerParams<T>& params, Var x, std::span<const std::uint8_t> pad_mask,
                             std::size_t seq_len);
template <typename T>
MemoryForward memory_forward(Graph<T>& g, const MemoryLayerParams<T>& params, Var x,
                             std::span<const std::uint8_t> pad_mask, std::size_t seq_len);

}  // namespace smf
