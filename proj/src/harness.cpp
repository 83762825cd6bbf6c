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

#include "smf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace smf {

std::string EvalReport::to_json() const {
  Json j;
  j["step"] = step;
  j["facts_seen"] = facts_seen;
  j["target_acc"] = target_acc;
  j["target_seen_acc"] = target_seen_acc;
  j["heldout_acc"] = heldout_acc;
  j["heldout_nll"] = heldout_nll;
  j["distinct_rows_trained"] = distinct_rows_trained;
  j["row_updates"] = row_updates;
  j["max_updates_per_row"] = max_updates_per_row;
  return j.dump();
}

double exact_match(const TransformerModel<float>& model, std::span<const FactRecord> facts,
                   const LoraAdapters<float>* lora) {
  if (facts.empty()) return 0.0;
  // Group by answer length so each group decodes in one batch.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < facts.size(); ++i) groups[facts[i].object.size()].push_back(i);
  std::size_t correct = 0;
  for (const auto& [len, members] : groups) {
    std::vector<std::vector<std::uint32_t>> prompts;
    prompts.reserve(members.size());
    for (auto i : members) prompts.push_back(facts[i].question);
    auto answers = greedy_answers(model, std::span<const std::vector<std::uint32_t>>(prompts), len, lora);
    for (std::size_t j = 0; j < members.size(); ++j) correct += answers[j] == facts[members[j]].object;
  }
  return static_cast<double>(correct) / static_cast<double>(facts.size());
}

double mean_nll(const TransformerModel<float>& model, std::span<const std::vector<std::uint32_t>> sequences,
                std::size_t seq_len, const LoraAdapters<float>* lora) {
  double total = 0.0;
  std::size_t targets = 0;
  for (const auto& batch : chunk_batches(sequences, 16, seq_len)) {
    const auto n = static_cast<std::size_t>(std::count(batch.loss_mask.begin(), batch.loss_mask.end(), 1));
    if (n == 0) continue;
    total += forward_loss(model, batch, false, lora).loss * static_cast<double>(n);
    targets += n;
  }
  if (targets == 0) throw EmptyLossError("no NLL targets in evaluation sequences");
  return total / static_cast<double>(targets);
}

EvalReport evaluate(const TransformerModel<float>& model, const FactDataset& data,
                    std::span<const FactRecord> target_facts, const LoraAdapters<float>* lora) {
  EvalReport r;
  r.target_acc = exact_match(model, target_facts, lora);
  r.heldout_acc = exact_match(model, data.pretrain_facts, lora);
  r.heldout_nll = mean_nll(model, data.filler_eval, model.config.max_seq_len, lora);
  return r;
}

EvalReport evaluate(const TransformerModel<float>& model, const FactDataset& data) {
  return evaluate(model, data, data.stream_facts);
}

namespace {

double schedule(const PretrainConfig& p, std::size_t step) {
  const double warm = std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(std::max<std::size_t>(1, p.warmup)));
  const double progress = static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, p.steps));
  return p.lr * warm * 0.5 * (1.0 + std::cos(M_PI * progress));
}

constexpr std::uint64_t kPretrainStream = 0x7072657472;
constexpr std::uint64_t kBackgroundStream = 0x6267;

}  // namespace

std::vector<Batch> pretrain_background_batches(const FactDataset& data, const ExperimentConfig& config,
                                               std::uint64_t seed) {
  CounterRng rng(seed, kBackgroundStream);
  std::vector<Batch> out;
  for (std::size_t i = 0; i < config.pretrain.background_batches; ++i) {
    out.push_back(pretrain_batch(data, config.pretrain.mix, config.pretrain.batch_size, config.pretrain.seq_len, rng));
  }
  return out;
}

std::vector<Batch> filler_background_batches(const FactDataset& data, const ExperimentConfig& config,
                                             std::uint64_t seed) {
  CounterRng rng(seed, kBackgroundStream + 1);
  PretrainMix filler_only{0.0, 0.0};
  std::vector<Batch> out;
  for (std::size_t i = 0; i < config.pretrain.background_batches; ++i) {
    out.push_back(pretrain_batch(data, filler_only, config.pretrain.batch_size, config.pretrain.seq_len, rng));
  }
  return out;
}

std::vector<Batch> stream_background_batches(std::span<const FactRecord> stream, const ExperimentConfig& config) {
  std::vector<Batch> out;
  for (const auto& fact : stream) out.push_back(fact_batch(fact, config.stream.batch_size, config.stream.seq_len));
  return out;
}

BackgroundIndexStore background_store(BackgroundCorpus corpus, const Checkpoint& base, const FactDataset& data,
                                      std::span<const FactRecord> stream) {
  switch (corpus) {
    case BackgroundCorpus::pretrain: return base.store;
    case BackgroundCorpus::filler:
      return build_background_store<float>(filler_background_batches(data, base.config, base.config.seed), base.model,
                                           "filler");
    case BackgroundCorpus::stream:
      return build_background_store<float>(stream_background_batches(stream, base.config), base.model, "stream");
  }
  throw ConfigError("unhandled background corpus");
}

PretrainResult pretrain_base(const FactDataset& data, const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const auto& p = config.pretrain;
  PretrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.model = init_model<float>(config.model);
  auto& model = ckpt.model;

  CounterRng rng(config.seed, kPretrainStream);
  OptimizerConfig opt;
  opt.kind = OptimizerKind::adamw;
  opt.weight_decay = p.weight_decay;
  OptimizerState<float> state;
  double running = 0.0;
  auto record = [&](std::size_t step) {
    PretrainPoint pt;
    pt.step = step;
    pt.train_loss = running;
    pt.heldout_acc = exact_match(model, data.pretrain_facts);
    pt.heldout_nll = mean_nll(model, data.filler_eval, config.model.max_seq_len);
    result.curve.push_back(pt);
    if (log) {
      *log << "pretrain step " << step << " loss " << pt.train_loss << " heldout_acc " << pt.heldout_acc
           << " heldout_nll " << pt.heldout_nll << std::endl;
    }
  };
  for (std::size_t step = 0; step < p.steps; ++step) {
    opt.lr = schedule(p, step);
    const Batch batch = pretrain_batch(data, p.mix, p.batch_size, p.seq_len, rng);
    const double loss = full_step(model, batch, opt, state, p.value_lr_scale).loss;
    running = step == 0 ? loss : 0.98 * running + 0.02 * loss;
    if (p.eval_every > 0 && (step + 1) % p.eval_every == 0 && step + 1 != p.steps) record(step + 1);
  }
  record(p.steps);

  const double final_acc = result.curve.back().heldout_acc;
  if (final_acc < p.min_heldout_acc) {
    std::ostringstream msg;
    msg << "pretraining reached held-out accuracy " << final_acc << " < required " << p.min_heldout_acc << " after "
        << p.steps << " steps; curve (step, loss, acc, nll):";
    for (const auto& pt : result.curve) {
      msg << " (" << pt.step << ", " << pt.train_loss << ", " << pt.heldout_acc << ", " << pt.heldout_nll << ")";
    }
    throw PretrainFailure(msg.str(), result.curve);
  }

  const auto batches = pretrain_background_batches(data, config, config.seed);
  ckpt.store = build_background_store<float>(batches, model, "pretrain");
  ckpt.rng = rng.state();
  return result;
}

std::vector<FactRecord> select_stream(const FactDataset& data, const StreamConfig& cfg, std::uint64_t seed) {
  std::vector<FactRecord> facts = data.stream_facts;
  CounterRng rng(seed, 0x6f72646572);
  shuffle(facts.begin(), facts.end(), rng);
  if (cfg.n_facts > 0 && cfg.n_facts < facts.size()) facts.resize(cfg.n_facts);
  return facts;
}

StreamResult run_continual_stream(TransformerModel<float>& model, const FactDataset& data,
                                  std::span<const FactRecord> stream, const StreamConfig& cfg,
                                  const MethodSpec& method, const BackgroundIndexStore* store,
                                  const StreamOptions& options) {
  cfg.validate();
  method.validate();
  if (method.method == Method::sparse_memory && store == nullptr) {
    throw ConfigError("sparse_memory streaming needs a background index store");
  }
  if (stream.empty()) throw ConfigError("empty fact stream");
  Trainer<float> trainer(model, method, store, options.seed);

  StreamResult result;
  std::map<std::uint32_t, std::size_t> updates;
  double trainable_sum = 0.0;
  const std::size_t per_row = model.config.memory.value_dim;

  auto report = [&](std::size_t facts_seen) {
    EvalReport r;
    r.step = result.steps;
    r.facts_seen = facts_seen;
    r.target_acc = exact_match(model, stream, trainer.adapters());
    r.target_seen_acc = facts_seen == 0 ? 0.0 : exact_match(model, stream.first(facts_seen), trainer.adapters());
    if (options.evaluate_heldout) {
      r.heldout_acc = exact_match(model, data.pretrain_facts, trainer.adapters());
      r.heldout_nll = mean_nll(model, data.filler_eval, model.config.max_seq_len, trainer.adapters());
    }
    r.distinct_rows_trained = updates.size();
    for (const auto& [_, n] : updates) {
      r.row_updates += n;
      r.max_updates_per_row = std::max(r.max_updates_per_row, n);
    }
    if (options.metrics) *options.metrics << r.to_json() << '\n';
    result.reports.push_back(r);
  };

  report(0);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Batch batch = fact_batch(stream[i], cfg.batch_size, cfg.seq_len);
    for (std::size_t s = 0; s < cfg.steps_per_fact; ++s) {
      StepReport step = trainer.step(batch);
      ++result.steps;
      for (auto row : step.trained_indices) {
        ++updates[row];
        result.trained_rows.insert(row);
      }
      trainable_sum += static_cast<double>(
          method.trains_memory_values_only() ? step.trainable_count * per_row : step.trainable_count);
      if (options.step_log) *options.step_log << step.to_json() << '\n';
    }
    if ((i + 1) % cfg.eval_every == 0 || i + 1 == stream.size()) report(i + 1);
  }
  result.mean_trainable_params = trainable_sum / static_cast<double>(result.steps);
  return result;
}

std::string ArmResult::csv_header() {
  return "label,method,hyperparams,target_acc,heldout_acc_before,heldout_acc_after,heldout_nll_before,"
         "heldout_nll_after,trainable_params";
}

std::string ArmResult::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << label << ',' << method_name(spec.method) << ",\"" << describe(spec) << "\"," << after.target_acc << ','
      << before.heldout_acc << ',' << after.heldout_acc << ',' << before.heldout_nll << ',' << after.heldout_nll << ','
      << trainable_params;
  return out.str();
}

ArmResult run_arm(const std::string& label, const TransformerModel<float>& base, const FactDataset& data,
                  std::span<const FactRecord> stream, const StreamConfig& cfg, const MethodSpec& spec,
                  const BackgroundIndexStore* store, std::uint64_t seed, std::ostream* metrics) {
  TransformerModel<float> model = base;
  StreamOptions options;
  options.seed = seed;
  options.metrics = metrics;
  auto result = run_continual_stream(model, data, stream, cfg, spec, store, options);
  ArmResult arm;
  arm.label = label;
  arm.spec = spec;
  arm.before = result.reports.front();
  arm.after = result.reports.back();
  arm.trainable_params = result.mean_trainable_params;
  return arm;
}

CoreSet core_set_from_records(std::span<const AccessRecord> per_sequence) {
  CoreSet out;
  if (per_sequence.empty()) return out;
  std::vector<std::uint32_t> core;
  for (std::size_t s = 0; s < per_sequence.size(); ++s) {
    std::vector<std::uint32_t> seen(per_sequence[s].indices);
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    if (s == 0) {
      core = std::move(seen);
    } else {
      std::vector<std::uint32_t> both;
      std::set_intersection(core.begin(), core.end(), seen.begin(), seen.end(), std::back_inserter(both));
      core = std::move(both);
    }
  }
  out.indices = core;
  for (const auto& rec : per_sequence) {
    std::vector<std::size_t> counts(rec.positions.size(), 0);
    for (std::size_t p = 0; p < rec.positions.size(); ++p) {
      for (std::size_t h = 0; h < rec.n_heads; ++h) {
        for (auto i : rec.indices_at(p, h)) counts[p] += std::binary_search(core.begin(), core.end(), i);
      }
    }
    out.per_token.push_back(std::move(counts));
  }
  return out;
}

CoreSet compute_core_set(const TransformerModel<float>& model, const FactRecord& fact) {
  std::vector<std::vector<std::uint32_t>> sequences = fact.statements;
  sequences.push_back(fact.question);
  std::vector<AccessRecord> records;
  for (const auto& seq : sequences) {
    std::vector<std::vector<std::uint32_t>> one{seq};
    Graph<float> g(false);
    auto pass = build_forward(g, model, make_batch(one, seq.size()), static_cast<const LoraAdapters<float>*>(nullptr),
                              false);
    records.push_back(std::move(pass.record));
  }
  return core_set_from_records(records);
}

std::string SweepRow::csv_header() {
  return "method,hyperparams,target_acc,heldout_acc,heldout_nll,trainable_params,error";
}

std::string SweepRow::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << method << ',' << '"' << hyperparams << '"' << ',' << target_acc << ',' << heldout_acc << ',' << heldout_nll
      << ',' << trainable_params << ',' << '"' << error << '"';
  return out.str();
}

std::string describe(const MethodSpec& spec) {
  std::ostringstream out;
  out.precision(6);
  out << "opt=" << optimizer_name(spec.optimizer.kind) << " lr=" << spec.optimizer.lr;
  if (spec.optimizer.weight_decay > 0) out << " wd=" << spec.optimizer.weight_decay;
  if (spec.t) out << " t=" << *spec.t;
  if (spec.lora) {
    out << " rank=" << spec.lora->rank << " alpha=" << spec.lora->alpha
        << " target=" << lora_target_name(spec.lora->target);
  }
  return out.str();
}

std::vector<SweepRow> pareto_sweep(std::span<const MethodSpec> grid, const TransformerModel<float>& base,
                                   const FactDataset& data, std::span<const FactRecord> stream,
                                   const StreamConfig& cfg, const BackgroundIndexStore& store, std::uint64_t seed,
                                   std::ostream* log) {
  std::vector<SweepRow> rows;
  for (const auto& spec : grid) {
    SweepRow row;
    row.method = std::string(method_name(spec.method));
    row.hyperparams = describe(spec);
    try {
      TransformerModel<float> model = base;
      StreamOptions options;
      options.seed = seed;
      auto result = run_continual_stream(model, data, stream, cfg, spec, &store, options);
      const auto& last = result.reports.back();
      row.target_acc = last.target_acc;
      row.heldout_acc = last.heldout_acc;
      row.heldout_nll = last.heldout_nll;
      row.trainable_params = result.mean_trainable_params;
    } catch (const Error& e) {
      row.error = e.what();
    }
    if (log) *log << row.to_csv() << std::endl;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace smf
