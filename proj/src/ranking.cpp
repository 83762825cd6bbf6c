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

#include "smf/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "smf/binary_io.hpp"

namespace smf {
namespace {
constexpr std::uint32_t kStoreVersion = 1;
}

BackgroundIndexStore::BackgroundIndexStore(std::map<std::uint32_t, std::uint32_t> doc_freq, std::size_t num_batches,
                                           std::string corpus_label)
    : doc_freq_(std::move(doc_freq)), num_batches_(num_batches), corpus_label_(std::move(corpus_label)) {
  if (num_batches_ == 0) throw ConfigError("background store needs at least one batch");
  for (const auto& [index, df] : doc_freq_) {
    if (df < 1 || df > num_batches_) {
      throw ConfigError("doc_freq " + std::to_string(df) + " of index " + std::to_string(index) + " outside [1, " +
                        std::to_string(num_batches_) + "]");
    }
  }
}

BackgroundIndexStore BackgroundIndexStore::from_batch_counts(std::span<const BatchAccessCounts> per_batch,
                                                             std::string corpus_label) {
  if (per_batch.empty()) throw ConfigError("background corpus has no batches");
  std::map<std::uint32_t, std::uint32_t> df;
  for (const auto& counts : per_batch) {
    for (const auto& [index, c] : counts.counts) {
      if (c > 0) ++df[index];
    }
  }
  return BackgroundIndexStore(std::move(df), per_batch.size(), std::move(corpus_label));
}

std::uint32_t BackgroundIndexStore::doc_freq(std::uint32_t index) const {
  auto it = doc_freq_.find(index);
  return it == doc_freq_.end() ? 0u : it->second;
}

std::vector<std::uint8_t> BackgroundIndexStore::serialize() const {
  ByteWriter w;
  w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("SMFB"), 4));
  w.put<std::uint32_t>(kStoreVersion);
  w.put<std::uint64_t>(num_batches_);
  w.put_string(corpus_label_);
  w.put<std::uint64_t>(doc_freq_.size());
  for (const auto& [index, df] : doc_freq_) {
    w.put<std::uint32_t>(index);
    w.put<std::uint32_t>(df);
  }
  return w.take();
}

BackgroundIndexStore BackgroundIndexStore::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.get_bytes(4);
  if (std::string(magic.begin(), magic.end()) != "SMFB") throw ChecksumError("background store: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kStoreVersion) {
    throw VersionError("background store version " + std::to_string(version) + " is not supported");
  }
  const auto b = r.get<std::uint64_t>();
  auto label = r.get_string();
  const auto n = r.get<std::uint64_t>();
  std::map<std::uint32_t, std::uint32_t> df;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto index = r.get<std::uint32_t>();
    df[index] = r.get<std::uint32_t>();
  }
  if (!r.done()) throw ChecksumError("background store: trailing bytes");
  return BackgroundIndexStore(std::move(df), static_cast<std::size_t>(b), std::move(label));
}

template <typename T>
BackgroundIndexStore build_background_store(std::span<const Batch> batches, const TransformerModel<T>& model,
                                            std::string corpus_label) {
  if (batches.empty()) throw ConfigError("background corpus has no batches");
  std::vector<BatchAccessCounts> per_batch;
  per_batch.reserve(batches.size());
  for (const auto& batch : batches) {
    Graph<T> g(false);
    auto pass = build_forward(g, model, batch, static_cast<const LoraAdapters<T>*>(nullptr), false);
    per_batch.push_back(count_batch_accesses(std::span<const AccessRecord>(&pass.record, 1)));
  }
  return BackgroundIndexStore::from_batch_counts(per_batch, std::move(corpus_label));
}

IndexScores tfidf_scores(const BatchAccessCounts& batch_counts, const BackgroundIndexStore& store) {
  IndexScores out;
  const double total = static_cast<double>(batch_counts.total());
  if (total <= 0.0) return out;
  const double numerator = static_cast<double>(store.num_batches()) + 1.0;
  for (const auto& [index, c] : batch_counts.counts) {
    if (c == 0) continue;
    const double tf = static_cast<double>(c) / total;
    const double idf = std::log(numerator / (static_cast<double>(store.doc_freq(index)) + 1.0));
    out[index] = tf * idf;
  }
  return out;
}

IndexScores tf_only_scores(const BatchAccessCounts& batch_counts) {
  IndexScores out;
  const double total = static_cast<double>(batch_counts.total());
  if (total <= 0.0) return out;
  for (const auto& [index, c] : batch_counts.counts) {
    if (c == 0) continue;
    out[index] = static_cast<double>(c) / total;
  }
  return out;
}

TrainableSet select_top_t(const IndexScores& scores, std::size_t t) {
  if (t == 0) throw ConfigError("top-t selection with t = 0 would train nothing");
  std::vector<std::pair<std::uint32_t, double>> ranked(scores.begin(), scores.end());
  const std::size_t keep = std::min(t, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                    [](const auto& a, const auto& b) { return a.second > b.second || (a.second == b.second && a.first < b.first); });
  TrainableSet out;
  out.t_requested = t;
  for (std::size_t i = 0; i < keep; ++i) {
    out.indices.push_back(ranked[i].first);
    out.scores.push_back(ranked[i].second);
  }
  return out;
}

template BackgroundIndexStore build_background_store<float>(std::span<const Batch>, const TransformerModel<float>&,
                                                            std::string);
template BackgroundIndexStore build_background_store<double>(std::span<const Batch>, const TransformerModel<double>&,
                                                             std::string);

}  // namespace smf
