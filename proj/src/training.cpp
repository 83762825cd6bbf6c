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

#include "smf/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "json.hpp"

#include "smf/ops.hpp"

namespace smf {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::sparse_memory: return "sparse_memory";
    case Method::memory_all: return "memory_all";
    case Method::memory_tf_only: return "memory_tf_only";
    case Method::full: return "full";
    case Method::lora: return "lora";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::sparse_memory, Method::memory_all, Method::memory_tf_only, Method::full, Method::lora}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adamw"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adamw") return OptimizerKind::adamw;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view lora_target_name(LoraTarget t) {
  return t == LoraTarget::all_linear ? "all_linear" : "attention_only";
}

LoraTarget parse_lora_target(std::string_view name) {
  if (name == "all_linear") return LoraTarget::all_linear;
  if (name == "attention_only") return LoraTarget::attention_only;
  throw ConfigError("unknown LoRA target '" + std::string(name) + "'");
}

void MethodSpec::validate() const {
  optimizer.validate();
  const bool ranked = method == Method::sparse_memory || method == Method::memory_tf_only;
  if (ranked && !t) throw ConfigError(std::string(method_name(method)) + " needs a top-t value");
  if (!ranked && t) throw ConfigError(std::string(method_name(method)) + " does not take a top-t value");
  if (ranked && *t == 0) throw ConfigError("top-t must be at least 1");
  if (method == Method::lora && !lora) throw ConfigError("lora method needs a LoRA config");
  if (method != Method::lora && lora) throw ConfigError(std::string(method_name(method)) + " does not take a LoRA config");
  if (lora) lora->validate();
}

std::string StepReport::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["method"] = method_name(method);
  j["loss"] = loss;
  j["trainable"] = trainable_count;
  j["lr"] = lr;
  j["grad_norm"] = grad_norm;
  return j.dump();
}

namespace {

// Flips trainable flags for the duration of a step and restores them after.
template <typename T>
class FreezeGuard {
 public:
  FreezeGuard(std::vector<Parameter<T>*> params, bool trainable) : params_(std::move(params)) {
    saved_.reserve(params_.size());
    for (auto* p : params_) {
      saved_.push_back(p->trainable);
      p->trainable = trainable;
    }
  }
  ~FreezeGuard() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i]->trainable = saved_[i];
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<bool> saved_;
};

template <typename T>
double grad_norm(std::span<Parameter<T>* const> params) {
  double s = 0.0;
  for (auto* p : params) {
    for (auto g : p->grad.data()) s += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(s);
}

template <typename T>
double row_grad_norm(const Parameter<T>& p, std::span<const std::uint32_t> rows) {
  double s = 0.0;
  const std::size_t cols = p.grad.cols();
  for (auto r : rows) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double g = p.grad[r * cols + c];
      s += g * g;
    }
  }
  return std::sqrt(s);
}

template <typename T>
void scale_grads(std::span<Parameter<T>* const> params, double factor) {
  for (auto* p : params) {
    for (auto& g : p->grad.data()) g = static_cast<T>(g * factor);
  }
}

double clip_factor(double norm, const OptimizerConfig& opt) {
  if (opt.max_grad_norm <= 0.0 || norm <= opt.max_grad_norm) return 1.0;
  return opt.max_grad_norm / (norm + 1e-12);
}

template <typename T>
void dense_update(std::span<Parameter<T>* const> params, const OptimizerConfig& opt, OptimizerState<T>& state) {
  for (auto* p : params) {
    if (opt.kind == OptimizerKind::sgd) {
      sgd_update(*p, opt.lr);
    } else {
      state.adamw.update(*p, opt);
    }
  }
}

using Selector = std::function<TrainableSet(const BatchAccessCounts&)>;

template <typename T>
StepReport memory_values_step(TransformerModel<T>& model, const Batch& batch, const Selector& select,
                              const OptimizerConfig& opt, OptimizerState<T>& state, Method method) {
  opt.validate();
  auto& values = model.memory.values;
  auto all = model.parameters();
  FreezeGuard<T> frozen(all, false);
  values.trainable = true;
  for (auto* p : all) p->zero_grad();

  Graph<T> g(true);
  auto pass = build_forward(g, model, batch, static_cast<LoraAdapters<T>*>(nullptr), true);
  const auto counts = count_batch_accesses(std::span<const AccessRecord>(&pass.record, 1));
  TrainableSet set = select(counts);

  values.grad_row_mask.assign(values.value.rows(), 0);
  for (auto i : set.indices) values.grad_row_mask[i] = 1;
  g.backward(pass.loss);
  values.grad_row_mask.clear();

  // Update in ascending row order; the ranked order is kept in the report.
  std::vector<std::uint32_t> rows = set.indices;
  std::sort(rows.begin(), rows.end());
  const double norm = row_grad_norm(values, rows);
  const double factor = clip_factor(norm, opt);
  if (factor != 1.0) {
    Parameter<T>* vp = &values;
    scale_grads(std::span<Parameter<T>* const>(&vp, 1), factor);
  }
  if (opt.kind == OptimizerKind::sgd) {
    sgd_update_rows(values, rows, opt.lr);
  } else {
    state.adamw.update_rows(values, rows, opt);
  }

  StepReport report;
  report.step = state.steps++;
  report.method = method;
  report.loss = static_cast<double>(g.value(pass.loss).item());
  report.trainable_count = set.size();
  report.lr = opt.lr;
  report.grad_norm = norm;
  report.trained_indices = std::move(set.indices);
  return report;
}

}  // namespace

template <typename T>
StepReport sparse_memory_step(TransformerModel<T>& model, const Batch& batch, const BackgroundIndexStore& store,
                              std::size_t t, const OptimizerConfig& opt, OptimizerState<T>& state) {
  if (t == 0) throw ConfigError("sparse memory finetuning needs t >= 1");
  return memory_values_step<T>(
      model, batch, [&](const BatchAccessCounts& c) { return select_top_t(tfidf_scores(c, store), t); }, opt, state,
      Method::sparse_memory);
}

template <typename T>
StepReport memory_tf_only_step(TransformerModel<T>& model, const Batch& batch, std::size_t t,
                               const OptimizerConfig& opt, OptimizerState<T>& state) {
  if (t == 0) throw ConfigError("TF-only memory finetuning needs t >= 1");
  return memory_values_step<T>(
      model, batch, [&](const BatchAccessCounts& c) { return select_top_t(tf_only_scores(c), t); }, opt, state,
      Method::memory_tf_only);
}

template <typename T>
StepReport memory_all_step(TransformerModel<T>& model, const Batch& batch, const OptimizerConfig& opt,
                           OptimizerState<T>& state) {
  return memory_values_step<T>(
      model, batch,
      [](const BatchAccessCounts& c) {
        TrainableSet set;
        set.t_requested = c.counts.size();
        for (const auto& [index, _] : c.counts) {
          set.indices.push_back(index);
          set.scores.push_back(1.0);
        }
        return set;
      },
      opt, state, Method::memory_all);
}

template <typename T>
StepReport full_step(TransformerModel<T>& model, const Batch& batch, const OptimizerConfig& opt,
                     OptimizerState<T>& state, double value_lr_scale) {
  opt.validate();
  auto params = model.parameters();
  FreezeGuard<T> all_on(params, true);
  for (auto* p : params) p->zero_grad();
  Graph<T> g(true);
  auto pass = build_forward(g, model, batch, static_cast<LoraAdapters<T>*>(nullptr), true);
  g.backward(pass.loss);
  const double norm = grad_norm<T>(params);
  const double factor = clip_factor(norm, opt);
  if (factor != 1.0) scale_grads<T>(params, factor);
  if (value_lr_scale == 1.0) {
    dense_update<T>(params, opt, state);
  } else {
    std::vector<Parameter<T>*> rest;
    for (auto* p : params) {
      if (p != &model.memory.values) rest.push_back(p);
    }
    dense_update<T>(rest, opt, state);
    OptimizerConfig scaled = opt;
    scaled.lr *= value_lr_scale;
    Parameter<T>* values[] = {&model.memory.values};
    dense_update<T>(values, scaled, state);
  }

  StepReport report;
  report.step = state.steps++;
  report.method = Method::full;
  report.loss = static_cast<double>(g.value(pass.loss).item());
  report.trainable_count = model.parameter_count();
  report.lr = opt.lr;
  report.grad_norm = norm;
  return report;
}

template <typename T>
LoraAdapters<T> lora_attach(const TransformerModel<T>& model, const LoraConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  LoraAdapters<T> adapters;
  adapters.config = cfg;
  CounterRng rng(seed, 0x6c6f7261);
  auto attach = [&](const Parameter<T>& w) {
    const std::size_t in = w.value.rows(), out = w.value.cols();
    if (cfg.rank > std::min(in, out)) {
      throw ConfigError("LoRA rank " + std::to_string(cfg.rank) + " exceeds min dimension of " + w.id + " " +
                        shape_string(w.value.shape()));
    }
    LoraAdapter<T> ad;
    Tensor<T> a = Tensor<T>::zeros(in, cfg.rank);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& x : a.data()) x = static_cast<T>(rng.normal() * stddev);
    ad.a = Parameter<T>(w.id + ".lora_a", std::move(a));
    ad.b = Parameter<T>(w.id + ".lora_b", Tensor<T>::zeros(cfg.rank, out));
    ad.scale = static_cast<T>(cfg.alpha / static_cast<double>(cfg.rank));
    adapters.by_weight.emplace(w.id, std::move(ad));
  };
  for (const auto& blk : model.blocks) {
    for (const auto* w : {&blk.wq, &blk.wk, &blk.wv, &blk.wo}) attach(*w);
    if (cfg.target == LoraTarget::all_linear && blk.has_ffn) {
      attach(blk.ffn_in);
      attach(blk.ffn_out);
    }
  }
  return adapters;
}

template <typename T>
StepReport lora_step(TransformerModel<T>& model, LoraAdapters<T>& adapters, const Batch& batch,
                     const OptimizerConfig& opt, OptimizerState<T>& state) {
  opt.validate();
  FreezeGuard<T> base_frozen(model.parameters(), false);
  auto params = adapters.parameters();
  FreezeGuard<T> adapters_on(params, true);
  for (auto* p : params) p->zero_grad();
  Graph<T> g(true);
  auto pass = build_forward(g, model, batch, &adapters, true);
  g.backward(pass.loss);
  const double norm = grad_norm<T>(params);
  const double factor = clip_factor(norm, opt);
  if (factor != 1.0) scale_grads<T>(params, factor);
  dense_update<T>(params, opt, state);

  StepReport report;
  report.step = state.steps++;
  report.method = Method::lora;
  report.loss = static_cast<double>(g.value(pass.loss).item());
  for (auto* p : params) report.trainable_count += p->value.size();
  report.lr = opt.lr;
  report.grad_norm = norm;
  return report;
}

template <typename T>
Trainer<T>::Trainer(TransformerModel<T>& model, MethodSpec spec, const BackgroundIndexStore* store, std::uint64_t seed)
    : model_(model), spec_(std::move(spec)), store_(store) {
  spec_.validate();
  if (spec_.method == Method::sparse_memory && store_ == nullptr) {
    throw ConfigError("sparse_memory needs a background index store");
  }
  if (spec_.method == Method::lora) adapters_ = lora_attach(model_, *spec_.lora, seed);
}

template <typename T>
StepReport Trainer<T>::step(const Batch& batch) {
  switch (spec_.method) {
    case Method::sparse_memory: return sparse_memory_step(model_, batch, *store_, *spec_.t, spec_.optimizer, state_);
    case Method::memory_tf_only: return memory_tf_only_step(model_, batch, *spec_.t, spec_.optimizer, state_);
    case Method::memory_all: return memory_all_step(model_, batch, spec_.optimizer, state_);
    case Method::full: return full_step(model_, batch, spec_.optimizer, state_);
    case Method::lora: return lora_step(model_, *adapters_, batch, spec_.optimizer, state_);
  }
  throw ConfigError("unhandled method");
}

#define SMF_INSTANTIATE_TRAINING(T)                                                                              \
  template StepReport sparse_memory_step<T>(TransformerModel<T>&, const Batch&, const BackgroundIndexStore&,      \
                                            std::size_t, const OptimizerConfig&, OptimizerState<T>&);            \
  template StepReport memory_tf_only_step<T>(TransformerModel<T>&, const Batch&, std::size_t,                    \
                                             const OptimizerConfig&, OptimizerState<T>&);                        \
  template StepReport memory_all_step<T>(TransformerModel<T>&, const Batch&, const OptimizerConfig&,             \
                                         OptimizerState<T>&);                                                     \
  template StepReport full_step<T>(TransformerModel<T>&, const Batch&, const OptimizerConfig&, OptimizerState<T>&,    \
                                   double);                                                                       \
  template LoraAdapters<T> lora_attach<T>(const TransformerModel<T>&, const LoraConfig&, std::uint64_t);           \
  template StepReport lora_step<T>(TransformerModel<T>&, LoraAdapters<T>&, const Batch&, const OptimizerConfig&,   \
                                   OptimizerState<T>&);                                                           \
  template class Trainer<T>;

SMF_INSTANTIATE_TRAINING(float)
SMF_INSTANTIATE_TRAINING(double)

}  // namespace smf
