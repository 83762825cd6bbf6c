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

#include "smf/memory_layer.hpp"
#include "smf/model.hpp"

namespace smf {

// Document frequencies of memory indices over a fixed set of background
// batches: doc_freq(i) = number of batches in which index i was accessed.
// Immutable once built; it is stored alongside the model in checkpoints.
class BackgroundIndexStore {
 public:
  BackgroundIndexStore() = default;
  BackgroundIndexStore(std::map<std::uint32_t, std::uint32_t> doc_freq, std::size_t num_batches,
                       std::string corpus_label);

  // One BatchAccessCounts per background batch.
  static BackgroundIndexStore from_batch_counts(std::span<const BatchAccessCounts> per_batch, std::string corpus_label);

  std::uint32_t doc_freq(std::uint32_t index) const;
  const std::map<std::uint32_t, std::uint32_t>& entries() const { return doc_freq_; }
  std::size_t num_batches() const { return num_batches_; }
  const std::string& corpus_label() const { return corpus_label_; }

  // Layout (little-endian): "SMFB", u32 version, u64 B, u32 label length,
  // label bytes, u64 entry count, then (u32 index, u32 doc_freq) pairs in
  // ascending index order.
  std::vector<std::uint8_t> serialize() const;
  static BackgroundIndexStore deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const BackgroundIndexStore&, const BackgroundIndexStore&) = default;

 private:
  std::map<std::uint32_t, std::uint32_t> doc_freq_;
  std::size_t num_batches_ = 0;
  std::string corpus_label_;
};

// Runs the frozen model over each batch with access recording.
template <typename T>
BackgroundIndexStore build_background_store(std::span<const Batch> batches, const TransformerModel<T>& model,
                                            std::string corpus_label);

using IndexScores = std::map<std::uint32_t, double>;

// score(i) = c(i)/Σ_j c(j) · ln((B + 1) / (doc_freq(i) + 1)) for every index
// accessed in the batch.
IndexScores tfidf_scores(const BatchAccessCounts& batch_counts, const BackgroundIndexStore& store);

// score(i) = c(i)/Σ_j c(j); the ranking ablation without the IDF factor.
IndexScores tf_only_scores(const BatchAccessCounts& batch_counts);

struct TrainableSet {
  std::vector<std::uint32_t> indices;  // ranked: score desc, index asc
  std::vector<double> scores;
  std::size_t t_requested = 0;

  std::size_t size() const { return indices.size(); }
};

// Top-t indices by score, ties by ascending index; returns every scored
// index when fewer than t exist. Throws ConfigError for t = 0.
TrainableSet select_top_t(const IndexScores& scores, std::size_t t);

}  // namespace smf
