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
#include <span>

#include "smf/autodiff.hpp"

namespace smf {

// Plain (tape-free) dense kernels. All accumulate into `out` when
// `accumulate` is set, otherwise overwrite it.
namespace kernels {

// out[m×n] = a[m×k] · b[k×n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// out[m×n] = a[m×k] · b[n×k]ᵀ
template <typename T>
void gemm_nt(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// out[k×n] = a[m×k]ᵀ · b[m×n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
T sigmoid(T x);

}  // namespace kernels

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b);
// a[m×k] · b[n×k]ᵀ; used for the tied output projection.
template <typename T>
Var matmul_nt(Graph<T>& g, Var a, Var b);
template <typename T>
Var add(Graph<T>& g, Var a, Var b);
template <typename T>
Var mul(Graph<T>& g, Var a, Var b);
template <typename T>
Var scale(Graph<T>& g, Var a, T factor);
template <typename T>
Var sum(Graph<T>& g, Var a);
template <typename T>
Var silu(Graph<T>& g, Var x);
// Row-wise softmax with max subtraction.
template <typename T>
Var softmax_rows(Graph<T>& g, Var x);
template <typename T>
Var layer_norm(Graph<T>& g, Var x, Var gain, Var bias, T eps = T(1e-5));
template <typename T>
Var gather_rows(Graph<T>& g, Var table, std::span<const std::uint32_t> ids);

struct AttentionShape {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::size_t heads = 0;
};

// Multi-head causal self-attention over row blocks of `seq` rows per
// sequence. Keys at positions whose key_mask entry is 0 are never attended
// to (except by themselves, so padded queries stay well defined).
template <typename T>
Var causal_attention(Graph<T>& g, Var q, Var k, Var v, AttentionShape shape,
                     std::span<const std::uint8_t> key_mask);

// Mean NLL over rows with mask != 0. Throws EmptyLossError if no row is in.
template <typename T>
Var cross_entropy_masked(Graph<T>& g, Var logits, std::span<const std::uint32_t> targets,
                         std::span<const std::uint8_t> mask);

// Composite product-key scores for pre-selected flat indices:
// out[r][j] = keys1[i1]·query[r][:d/2] + keys2[i2]·query[r][d/2:], flat = i1*side + i2.
// Index selection itself is not differentiable; gradient reaches the
// query and both half-key tables through the selected entries only.
template <typename T>
Var selected_key_scores(Graph<T>& g, Var query, Var keys1, Var keys2,
                        std::span<const std::uint32_t> flat_indices, std::size_t k);

// out[r] = Σ_j weights[r][j] · table[indices[r][j]]
template <typename T>
Var weighted_row_sum(Graph<T>& g, Var table, std::span<const std::uint32_t> indices, Var weights);

}  // namespace smf
