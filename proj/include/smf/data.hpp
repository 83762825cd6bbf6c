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
#include <vector>

#include "smf/model.hpp"
#include "smf/rng.hpp"

namespace smf {

// Token-id ranges of the synthetic vocabulary. Ids below `template_begin`
// are reserved specials.
struct Vocabulary {
  static constexpr std::uint32_t pad = 0;
  static constexpr std::uint32_t bos = 1;
  static constexpr std::uint32_t eos = 2;
  static constexpr std::uint32_t question = 3;
  static constexpr std::uint32_t connector = 4;

  std::size_t size = 0;
  std::uint32_t template_begin = 5, n_template = 0;
  std::uint32_t relation_begin = 0, n_relation = 0;
  std::uint32_t entity_begin = 0, n_entity = 0;
  std::uint32_t object_begin = 0, n_object = 0;
  std::uint32_t filler_begin = 0, n_filler = 0;

  static Vocabulary partition(std::size_t vocab_size);

  // Distinct (two-token subject, relation) pairs available.
  std::uint64_t fact_capacity() const;
};

struct DataConfig {
  std::uint64_t seed = 0;
  std::size_t vocab_size = 512;
  std::size_t n_pretrain = 400;
  std::size_t n_stream = 200;
  std::size_t n_templates = 8;
  std::size_t n_filler = 4000;
  std::size_t n_filler_eval = 64;
  std::size_t filler_min_len = 8;
  std::size_t filler_max_len = 20;

  void validate() const;
};

// A statement shape: prefix words, subject/relation order, optional suffix word.
struct StatementTemplate {
  std::vector<std::uint32_t> prefix;
  bool relation_first = false;
  std::uint32_t suffix = 0;  // 0 = none

  std::vector<std::uint32_t> render(std::span<const std::uint32_t> subject, std::span<const std::uint32_t> relation,
                                    std::span<const std::uint32_t> object) const;
};

struct FactRecord {
  std::uint32_t fact_id = 0;
  std::vector<std::uint32_t> subject;
  std::vector<std::uint32_t> relation;
  std::vector<std::uint32_t> object;
  std::vector<std::vector<std::uint32_t>> statements;  // one per template
  std::vector<std::uint32_t> question;                 // prompt; the answer is `object`

  std::vector<std::uint32_t> question_with_answer() const;
};

struct FactDataset {
  DataConfig config;
  Vocabulary vocab;
  std::vector<StatementTemplate> templates;
  std::vector<FactRecord> pretrain_facts;  // held-out knowledge
  std::vector<FactRecord> stream_facts;    // new knowledge
  std::vector<std::vector<std::uint32_t>> filler_corpus;
  std::vector<std::vector<std::uint32_t>> filler_eval;
  std::uint64_t seed = 0;
};

FactDataset generate_fact_universe(const DataConfig& config);
FactDataset generate_fact_universe(std::uint64_t seed, std::size_t n_pretrain, std::size_t n_stream,
                                   std::size_t n_templates);

// Paraphrases of one fact, cycling through its statements, one per row.
Batch fact_batch(const FactRecord& fact, std::size_t batch_size, std::size_t seq_len);

struct PretrainMix {
  double statement_fraction = 0.45;
  double question_fraction = 0.25;  // remainder is filler
  // Questions are drawn only from this leading share of the pretraining
  // facts; the rest are seen as statements alone.
  double qa_fact_fraction = 1.0;

  std::size_t qa_fact_count(std::size_t n_facts) const;
};

Batch pretrain_batch(const FactDataset& data, const PretrainMix& mix, std::size_t batch_size, std::size_t seq_len,
                     CounterRng& rng);

// Consecutive chunks of `sequences`, each at most `batch_size` rows.
std::vector<Batch> chunk_batches(std::span<const std::vector<std::uint32_t>> sequences, std::size_t batch_size,
                                 std::size_t seq_len);

}  // namespace smf
