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

#include "smf/memory_layer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smf/ops.hpp"

namespace smf {

std::size_t MemoryConfig::side() const {
  auto s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(mem_size))));
  while (s * s > mem_size) --s;
  while ((s + 1) * (s + 1) <= mem_size) ++s;
  return s;
}

void MemoryConfig::validate() const {
  if (mem_size == 0 || side() * side() != mem_size) {
    throw ConfigError("memory size " + std::to_string(mem_size) + " is not a perfect square");
  }
  if (topk == 0 || topk > side()) {
    throw ConfigError("memory top-k " + std::to_string(topk) + " must lie in [1, √N = " + std::to_string(side()) + "]");
  }
  if (n_heads == 0) throw ConfigError("memory needs at least one head");
  if (value_dim == 0) throw ConfigError("memory value_dim must be positive");
  if (key_dim == 0 || key_dim % 2 != 0) throw ConfigError("memory key_dim must be positive and even");
}

namespace {

template <typename T>
T dot(const T* x, const T* y, std::size_t n) {
  T acc{0};
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

// First k entries of `order` become the best k by (score desc, id asc).
template <typename T>
void best_k(std::vector<std::uint32_t>& order, const std::vector<T>& score, std::size_t k) {
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
}


}  // namespace

template <typename T>
TopK<T> product_key_topk(std::span<const T> q_half1, std::span<const T> q_half2, const Tensor<T>& keys1,
                         const Tensor<T>& keys2, std::size_t k) {
  const std::size_t side = keys1.rows(), half = keys1.cols();
  if (!keys1.same_shape(keys2) || q_half1.size() != half || q_half2.size() != half) {
    throw ShapeError("product_key_topk: half-key tables " + shape_string(keys1.shape()) + "/" +
                     shape_string(keys2.shape()) + " vs query halves of " + std::to_string(q_half1.size()) + "/" +
                     std::to_string(q_half2.size()));
  }
  if (k == 0 || k > side) {
    throw ConfigError("product_key_topk: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(side) + "]");
  }

  std::vector<T> s1(side), s2(side);
  for (std::size_t i = 0; i < side; ++i) {
    s1[i] = dot(keys1.ptr() + i * half, q_half1.data(), half);
    s2[i] = dot(keys2.ptr() + i * half, q_half2.data(), half);
  }
  std::vector<std::uint32_t> o1(side), o2(side);
  std::iota(o1.begin(), o1.end(), 0u);
  std::iota(o2.begin(), o2.end(), 0u);
  best_k(o1, s1, k);
  best_k(o2, s2, k);

  // Candidates are indexed by flat id so the composite tie rule is by flat index.
  std::vector<std::uint32_t> flat(k * k);
  std::vector<T> cand(k * k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      flat[a * k + b] = static_cast<std::uint32_t>(o1[a] * side + o2[b]);
      cand[a * k + b] = s1[o1[a]] + s2[o2[b]];
    }
  }
  std::vector<std::uint32_t> order(k * k);
  std::iota(order.begin(), order.end(), 0u);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return cand[a] > cand[b] || (cand[a] == cand[b] && flat[a] < flat[b]);
                    });
  TopK<T> out;
  out.indices.reserve(k);
  out.scores.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    out.indices.push_back(flat[order[j]]);
    out.scores.push_back(cand[order[j]]);
  }
  return out;
}

template <typename T>
std::vector<Parameter<T>*> MemoryLayerParams<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (std::size_t h = 0; h < query.size(); ++h) {
    out.push_back(&query[h]);
    out.push_back(&keys1[h]);
    out.push_back(&keys2[h]);
  }
  out.push_back(&values);
  out.push_back(&gate_in);
  out.push_back(&gate_out);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> MemoryLayerParams<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (auto* p : const_cast<MemoryLayerParams&>(*this).parameters()) out.push_back(p);
  return out;
}

namespace {

template <typename T>
Tensor<T> normal_matrix(CounterRng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Tensor<T> t = Tensor<T>::zeros(rows, cols);
  for (auto& x : t.data()) x = static_cast<T>(rng.normal() * stddev);
  return t;
}

}  // namespace

template <typename T>
MemoryLayerParams<T> init_memory_params(const MemoryConfig& config, std::size_t d_model, double out_std,
                                        CounterRng& rng, const std::string& prefix) {
  config.validate();
  MemoryLayerParams<T> p;
  p.config = config;
  const std::size_t half = config.key_dim / 2;
  const double query_std = 1.0 / std::sqrt(static_cast<double>(d_model));
  const double key_std = 1.0 / std::sqrt(static_cast<double>(half));
  for (std::size_t h = 0; h < config.n_heads; ++h) {
    const std::string hs = std::to_string(h);
    p.query.emplace_back(prefix + ".query." + hs, normal_matrix<T>(rng, d_model, config.key_dim, query_std));
    p.keys1.emplace_back(prefix + ".keys1." + hs, normal_matrix<T>(rng, config.side(), half, key_std));
    p.keys2.emplace_back(prefix + ".keys2." + hs, normal_matrix<T>(rng, config.side(), half, key_std));
  }
  p.values = Parameter<T>(prefix + ".values",
                          normal_matrix<T>(rng, config.mem_size, config.value_dim,
                                           1.0 / std::sqrt(static_cast<double>(config.value_dim))));
  p.gate_in = Parameter<T>(prefix + ".gate_in", normal_matrix<T>(rng, d_model, config.value_dim, query_std));
  p.gate_out = Parameter<T>(prefix + ".gate_out", normal_matrix<T>(rng, config.value_dim, d_model, out_std));
  return p;
}

std::uint64_t BatchAccessCounts::total() const {
  std::uint64_t t = 0;
  for (const auto& [_, c] : counts) t += c;
  return t;
}

BatchAccessCounts count_batch_accesses(std::span<const AccessRecord> records) {
  BatchAccessCounts out;
  for (const auto& rec : records) {
    for (auto i : rec.indices) ++out.counts[i];
  }
  return out;
}

namespace {

template <typename T, typename Params>
MemoryForward memory_forward_impl(Graph<T>& g, Params& params, Var x, std::span<const std::uint8_t> pad_mask,
                                  std::size_t seq_len) {
  const auto& cfg = params.config;
  const auto& xv = g.value(x);
  const std::size_t rows = xv.rows();
  if (pad_mask.size() != rows || seq_len == 0 || rows % seq_len != 0) {
    throw ShapeError("memory_forward: pad mask of " + std::to_string(pad_mask.size()) + " entries for input " +
                     shape_string(xv.shape()));
  }
  const std::size_t k = cfg.topk, H = cfg.n_heads, half = cfg.key_dim / 2;

  MemoryForward result;
  auto& rec = result.record;
  rec.k = k;
  rec.n_heads = H;
  for (std::size_t r = 0; r < rows; ++r) {
    if (pad_mask[r]) {
      rec.positions.push_back({static_cast<std::uint32_t>(r / seq_len), static_cast<std::uint32_t>(r % seq_len)});
    }
  }
  rec.indices.resize(rec.positions.size() * H * k);
  rec.weights.resize(rec.positions.size() * H * k);

  Var values = g.parameter(params.values);
  Var y{};
  for (std::size_t h = 0; h < H; ++h) {
    Var query = matmul(g, x, g.parameter(params.query[h]));
    const auto& qv = g.value(query);
    std::vector<std::uint32_t> selected(rows * k);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* qr = qv.ptr() + r * cfg.key_dim;
      auto top = product_key_topk<T>({qr, half}, {qr + half, half}, params.keys1[h].value, params.keys2[h].value, k);
      std::copy(top.indices.begin(), top.indices.end(), selected.begin() + static_cast<std::ptrdiff_t>(r * k));
    }
    Var scores = selected_key_scores(g, query, g.parameter(params.keys1[h]), g.parameter(params.keys2[h]),
                                     std::span<const std::uint32_t>(selected), k);
    Var weights = softmax_rows(g, scores);
    const auto& wv = g.value(weights);
    std::size_t p = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!pad_mask[r]) continue;
      for (std::size_t j = 0; j < k; ++j) {
        rec.indices[(p * H + h) * k + j] = selected[r * k + j];
        rec.weights[(p * H + h) * k + j] = static_cast<double>(wv(r, j));
      }
      ++p;
    }
    Var yh = weighted_row_sum(g, values, std::span<const std::uint32_t>(selected), weights);
    y = h == 0 ? yh : add(g, y, yh);
  }
  Var gate = silu(g, matmul(g, x, g.parameter(params.gate_in)));
  result.output = matmul(g, mul(g, y, gate), g.parameter(params.gate_out));
  return result;
}

}  // namespace

template <typename T>
MemoryForward memory_forward(Graph<T>& g, MemoryLayerParams<T>& params, Var x, std::span<const std::uint8_t> pad_mask,
                             std::size_t seq_len) {
  return memory_forward_impl(g, params, x, pad_mask, seq_len);
}

template <typename T>
MemoryForward memory_forward(Graph<T>& g, const MemoryLayerParams<T>& params, Var x,
                             std::span<const std::uint8_t> pad_mask, std::size_t seq_len) {
  return memory_forward_impl(g, params, x, pad_mask, seq_len);
}

#define SMF_INSTANTIATE_MEMORY(T)                                                                            \
  template TopK<T> product_key_topk<T>(std::span<const T>, std::span<const T>, const Tensor<T>&,             \
                                       const Tensor<T>&, std::size_t);                                       \
  template struct MemoryLayerParams<T>;                                                                      \
  template MemoryLayerParams<T> init_memory_params<T>(const MemoryConfig&, std::size_t, double, CounterRng&, \
                                                      const std::string&);                                   \
  template MemoryForward memory_forward<T>(Graph<T>&, MemoryLayerParams<T>&, Var,                           \
                                           std::span<const std::uint8_t>, std::size_t);                      \
  template MemoryForward memory_forward<T>(Graph<T>&, const MemoryLayerParams<T>&, Var,                     \
                                           std::span<const std::uint8_t>, std::size_t);

SMF_INSTANTIATE_MEMORY(float)
SMF_INSTANTIATE_MEMORY(double)

}  // namespace smf
