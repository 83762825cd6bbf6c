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
#include <set>
#include <span>
#include <string>
#include <vector>

#include "smf/checkpoint.hpp"
#include "smf/config.hpp"
#include "smf/data.hpp"
#include "smf/training.hpp"

namespace smf {

struct EvalReport {
  std::size_t step = 0;         // optimizer steps taken so far
  std::size_t facts_seen = 0;   // stream facts trained on so far
  double target_acc = 0.0;      // exact match over the run's stream facts
  double target_seen_acc = 0.0; // exact match over the facts streamed so far
  double heldout_acc = 0.0;     // exact match over the pretraining facts
  double heldout_nll = 0.0;     // mean token NLL over the held-out filler sample
  // Summary of which memory value rows were trained so far.
  std::size_t distinct_rows_trained = 0;
  std::size_t row_updates = 0;
  std::size_t max_updates_per_row = 0;

  std::string to_json() const;
};

double exact_match(const TransformerModel<float>& model, std::span<const FactRecord> facts,
                   const LoraAdapters<float>* lora = nullptr);
// Token-weighted mean NLL, batched.
double mean_nll(const TransformerModel<float>& model, std::span<const std::vector<std::uint32_t>> sequences,
                std::size_t seq_len, const LoraAdapters<float>* lora = nullptr);

EvalReport evaluate(const TransformerModel<float>& model, const FactDataset& data,
                    std::span<const FactRecord> target_facts, const LoraAdapters<float>* lora = nullptr);
EvalReport evaluate(const TransformerModel<float>& model, const FactDataset& data);

struct PretrainPoint {
  std::size_t step = 0;
  double train_loss = 0.0;
  double heldout_acc = 0.0;
  double heldout_nll = 0.0;
};

class PretrainFailure : public TrainingFailure {
 public:
  PretrainFailure(const std::string& what, std::vector<PretrainPoint> curve)
      : TrainingFailure(what), curve(std::move(curve)) {}
  std::vector<PretrainPoint> curve;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<PretrainPoint> curve;
};

// Raises PretrainFailure (carrying the curve) if held-out accuracy ends
// below config.pretrain.min_heldout_acc.
PretrainResult pretrain_base(const FactDataset& data, const ExperimentConfig& config, std::ostream* log = nullptr);

std::vector<Batch> pretrain_background_batches(const FactDataset& data, const ExperimentConfig& config,
                                               std::uint64_t seed);
std::vector<Batch> filler_background_batches(const FactDataset& data, const ExperimentConfig& config,
                                             std::uint64_t seed);
// One paraphrase batch per stream fact.
std::vector<Batch> stream_background_batches(std::span<const FactRecord> stream, const ExperimentConfig& config);
// The pretraining corpus reuses the checkpoint's store; the others are
// indexed with the checkpoint's model.
BackgroundIndexStore background_store(BackgroundCorpus corpus, const Checkpoint& base, const FactDataset& data,
                                      std::span<const FactRecord> stream);

// The stream facts for a run: a seeded permutation of the stream set,
// truncated to stream.n_facts when that is non-zero.
std::vector<FactRecord> select_stream(const FactDataset& data, const StreamConfig& cfg, std::uint64_t seed);

struct StreamResult {
  std::vector<EvalReport> reports;
  std::set<std::uint32_t> trained_rows;  // union of every step's trainable set
  double mean_trainable_params = 0.0;    // per step
  std::size_t steps = 0;
};

struct StreamOptions {
  std::uint64_t seed = 0;                  // LoRA init and fact order
  std::ostream* metrics = nullptr;         // JSON lines, one per report
  std::ostream* step_log = nullptr;        // JSON lines, one per step
  bool evaluate_heldout = true;
};

// Trains `model` in place on `stream`, one fact at a time.
StreamResult run_continual_stream(TransformerModel<float>& model, const FactDataset& data,
                                  std::span<const FactRecord> stream, const StreamConfig& cfg,
                                  const MethodSpec& method, const BackgroundIndexStore* store,
                                  const StreamOptions& options);

// One method run from a fresh copy of the base model, summarized by the
// first and last evaluation.
struct ArmResult {
  std::string label;
  MethodSpec spec;
  EvalReport before;
  EvalReport after;
  double trainable_params = 0.0;

  double heldout_acc_drop() const { return before.heldout_acc - after.heldout_acc; }
  double nll_increase() const { return after.heldout_nll - before.heldout_nll; }

  static std::string csv_header();
  std::string to_csv() const;
};

ArmResult run_arm(const std::string& label, const TransformerModel<float>& base, const FactDataset& data,
                  std::span<const FactRecord> stream, const StreamConfig& cfg, const MethodSpec& spec,
                  const BackgroundIndexStore* store, std::uint64_t seed, std::ostream* metrics = nullptr);

struct CoreSet {
  std::vector<std::uint32_t> indices;  // ascending
  // Per sequence (paraphrases then question), per token position: how many
  // of that position's accessed indices fall in the core set.
  std::vector<std::vector<std::size_t>> per_token;
};

// Intersection of the accessed-index sets of each sequence.
CoreSet core_set_from_records(std::span<const AccessRecord> per_sequence);
CoreSet compute_core_set(const TransformerModel<float>& model, const FactRecord& fact);

struct SweepRow {
  std::string method;
  std::string hyperparams;
  double target_acc = 0.0;
  double heldout_acc = 0.0;
  double heldout_nll = 0.0;
  double trainable_params = 0.0;  // per batch
  std::string error;              // non-empty if the run failed

  static std::string csv_header();
  std::string to_csv() const;
};

std::string describe(const MethodSpec& spec);

// One continual-stream run per spec, each from a fresh copy of `base`.
std::vector<SweepRow> pareto_sweep(std::span<const MethodSpec> grid, const TransformerModel<float>& base,
                                   const FactDataset& data, std::span<const FactRecord> stream,
                                   const StreamConfig& cfg, const BackgroundIndexStore& store, std::uint64_t seed,
                                   std::ostream* log = nullptr);

}  // namespace smf
