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

#include "smf/config.hpp"

#include <fstream>

#include "smf/binary_io.hpp"

namespace smf {

void PretrainConfig::validate() const {
  if (batch_size == 0 || seq_len < 2) throw ConfigError("pretrain batch_size and seq_len must be positive");
  if (!(lr > 0.0)) throw ConfigError("pretrain lr must be positive");
  if (mix.statement_fraction < 0 || mix.question_fraction < 0 || mix.statement_fraction + mix.question_fraction > 1) {
    throw ConfigError("pretrain mix fractions must be non-negative and sum to at most 1");
  }
  if (!(mix.qa_fact_fraction > 0 && mix.qa_fact_fraction <= 1)) {
    throw ConfigError("pretrain qa_fact_fraction must lie in (0, 1]");
  }
  if (!(value_lr_scale > 0.0)) throw ConfigError("pretrain value_lr_scale must be positive");
  if (background_batches == 0) throw ConfigError("background_batches must be positive");
}

std::string_view background_name(BackgroundCorpus c) {
  switch (c) {
    case BackgroundCorpus::pretrain: return "pretrain";
    case BackgroundCorpus::filler: return "filler";
    case BackgroundCorpus::stream: return "stream";
  }
  return "unknown";
}

BackgroundCorpus parse_background(std::string_view name) {
  for (auto c : {BackgroundCorpus::pretrain, BackgroundCorpus::filler, BackgroundCorpus::stream}) {
    if (background_name(c) == name) return c;
  }
  throw ConfigError("unknown background corpus '" + std::string(name) + "'");
}

void StreamConfig::validate() const {
  if (batch_size == 0 || seq_len < 2) throw ConfigError("stream batch_size and seq_len must be positive");
  if (paraphrases_per_fact != batch_size) {
    throw ConfigError("paraphrases_per_fact (" + std::to_string(paraphrases_per_fact) + ") must equal batch_size (" +
                      std::to_string(batch_size) + ")");
  }
  if (steps_per_fact == 0) throw ConfigError("steps_per_fact must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
}

MethodSpec ExperimentConfig::default_method() {
  MethodSpec m;
  m.method = Method::sparse_memory;
  m.t = 25;
  m.optimizer.kind = OptimizerKind::sgd;
  m.optimizer.lr = 300.0;
  return m;
}

void ExperimentConfig::validate() const {
  model.validate();
  data.validate();
  if (data.vocab_size != model.vocab_size) {
    throw ConfigError("data.vocab_size " + std::to_string(data.vocab_size) + " differs from model.vocab_size " +
                      std::to_string(model.vocab_size));
  }
  pretrain.validate();
  stream.validate();
  method.validate();
  if (stream.seq_len > model.max_seq_len || pretrain.seq_len > model.max_seq_len) {
    throw ConfigError("seq_len exceeds model.max_seq_len");
  }
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  const auto& m = c.model;
  j["model"] = {{"vocab_size", m.vocab_size},
                {"d_model", m.d_model},
                {"n_layers", m.n_layers},
                {"n_attn_heads", m.n_attn_heads},
                {"ffn_mult", m.ffn_mult},
                {"memory_layer_index", m.memory_layer_index},
                {"max_seq_len", m.max_seq_len},
                {"seed", m.seed},
                {"memory",
                 {{"mem_size", m.memory.mem_size},
                  {"topk", m.memory.topk},
                  {"n_heads", m.memory.n_heads},
                  {"value_dim", m.memory.value_dim},
                  {"key_dim", m.memory.key_dim}}}};
  const auto& d = c.data;
  j["data"] = {{"seed", d.seed},
               {"vocab_size", d.vocab_size},
               {"n_pretrain", d.n_pretrain},
               {"n_stream", d.n_stream},
               {"n_templates", d.n_templates},
               {"n_filler", d.n_filler},
               {"n_filler_eval", d.n_filler_eval},
               {"filler_min_len", d.filler_min_len},
               {"filler_max_len", d.filler_max_len}};
  const auto& p = c.pretrain;
  j["pretrain"] = {{"steps", p.steps},
                   {"batch_size", p.batch_size},
                   {"seq_len", p.seq_len},
                   {"lr", p.lr},
                   {"warmup", p.warmup},
                   {"weight_decay", p.weight_decay},
                   {"value_lr_scale", p.value_lr_scale},
                   {"statement_fraction", p.mix.statement_fraction},
                   {"question_fraction", p.mix.question_fraction},
                   {"qa_fact_fraction", p.mix.qa_fact_fraction},
                   {"background_batches", p.background_batches},
                   {"eval_every", p.eval_every},
                   {"min_heldout_acc", p.min_heldout_acc}};
  const auto& s = c.stream;
  j["stream"] = {{"batch_size", s.batch_size},
                 {"seq_len", s.seq_len},
                 {"paraphrases_per_fact", s.paraphrases_per_fact},
                 {"steps_per_fact", s.steps_per_fact},
                 {"eval_every", s.eval_every},
                 {"n_facts", s.n_facts},
                 {"background", background_name(s.background)}};
  const auto& ms = c.method;
  const auto& o = ms.optimizer;
  const LoraConfig lora = ms.lora.value_or(LoraConfig{});
  j["method"] = {{"name", method_name(ms.method)},
                 {"t", ms.t ? Json(*ms.t) : Json(nullptr)},
                 {"optimizer",
                  {{"kind", optimizer_name(o.kind)},
                   {"lr", o.lr},
                   {"weight_decay", o.weight_decay},
                   {"beta1", o.beta1},
                   {"beta2", o.beta2},
                   {"eps", o.eps},
                   {"max_grad_norm", o.max_grad_norm}}},
                 {"lora",
                  {{"rank", lora.rank}, {"alpha", lora.alpha}, {"target", lora_target_name(lora.target)}}}};
  return j;
}

namespace {

template <typename T>
void read(const Json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) {
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const Json& obj, const Json& defaults, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config field '" + where + key + "'");
    if (defaults[key].is_object()) reject_unknown(value, defaults[key], where + key + ".");
  }
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  auto it = j.find(key);
  return it == j.end() ? empty : *it;
}

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  reject_unknown(j, to_json(c), "");
  read(j, "seed", c.seed);

  const Json& m = section(j, "model");
  read(m, "vocab_size", c.model.vocab_size);
  read(m, "d_model", c.model.d_model);
  read(m, "n_layers", c.model.n_layers);
  read(m, "n_attn_heads", c.model.n_attn_heads);
  read(m, "ffn_mult", c.model.ffn_mult);
  read(m, "memory_layer_index", c.model.memory_layer_index);
  read(m, "max_seq_len", c.model.max_seq_len);
  read(m, "seed", c.model.seed);
  const Json& mem = section(m, "memory");
  read(mem, "mem_size", c.model.memory.mem_size);
  read(mem, "topk", c.model.memory.topk);
  read(mem, "n_heads", c.model.memory.n_heads);
  read(mem, "value_dim", c.model.memory.value_dim);
  read(mem, "key_dim", c.model.memory.key_dim);

  const Json& d = section(j, "data");
  read(d, "seed", c.data.seed);
  read(d, "vocab_size", c.data.vocab_size);
  read(d, "n_pretrain", c.data.n_pretrain);
  read(d, "n_stream", c.data.n_stream);
  read(d, "n_templates", c.data.n_templates);
  read(d, "n_filler", c.data.n_filler);
  read(d, "n_filler_eval", c.data.n_filler_eval);
  read(d, "filler_min_len", c.data.filler_min_len);
  read(d, "filler_max_len", c.data.filler_max_len);

  const Json& p = section(j, "pretrain");
  read(p, "steps", c.pretrain.steps);
  read(p, "batch_size", c.pretrain.batch_size);
  read(p, "seq_len", c.pretrain.seq_len);
  read(p, "lr", c.pretrain.lr);
  read(p, "warmup", c.pretrain.warmup);
  read(p, "weight_decay", c.pretrain.weight_decay);
  read(p, "statement_fraction", c.pretrain.mix.statement_fraction);
  read(p, "question_fraction", c.pretrain.mix.question_fraction);
  read(p, "value_lr_scale", c.pretrain.value_lr_scale);
  read(p, "qa_fact_fraction", c.pretrain.mix.qa_fact_fraction);
  read(p, "background_batches", c.pretrain.background_batches);
  read(p, "eval_every", c.pretrain.eval_every);
  read(p, "min_heldout_acc", c.pretrain.min_heldout_acc);

  const Json& s = section(j, "stream");
  read(s, "batch_size", c.stream.batch_size);
  read(s, "seq_len", c.stream.seq_len);
  read(s, "paraphrases_per_fact", c.stream.paraphrases_per_fact);
  read(s, "steps_per_fact", c.stream.steps_per_fact);
  read(s, "eval_every", c.stream.eval_every);
  read(s, "n_facts", c.stream.n_facts);
  std::string background(background_name(c.stream.background));
  read(s, "background", background);
  c.stream.background = parse_background(background);

  const Json& ms = section(j, "method");
  std::string name(method_name(c.method.method));
  read(ms, "name", name);
  c.method.method = parse_method(name);
  if (auto it = ms.find("t"); it != ms.end()) {
    if (it->is_null()) {
      c.method.t.reset();
    } else {
      std::size_t t = 0;
      read(ms, "t", t);
      c.method.t = t;
    }
  }
  const Json& o = section(ms, "optimizer");
  std::string kind(optimizer_name(c.method.optimizer.kind));
  read(o, "kind", kind);
  c.method.optimizer.kind = parse_optimizer(kind);
  read(o, "lr", c.method.optimizer.lr);
  read(o, "weight_decay", c.method.optimizer.weight_decay);
  read(o, "beta1", c.method.optimizer.beta1);
  read(o, "beta2", c.method.optimizer.beta2);
  read(o, "eps", c.method.optimizer.eps);
  read(o, "max_grad_norm", c.method.optimizer.max_grad_norm);
  const bool ranked = c.method.method == Method::sparse_memory || c.method.method == Method::memory_tf_only;
  if (!ranked) c.method.t.reset();
  if (c.method.method == Method::lora) {
    LoraConfig lora;
    const Json& l = section(ms, "lora");
    read(l, "rank", lora.rank);
    read(l, "alpha", lora.alpha);
    std::string target(lora_target_name(lora.target));
    read(l, "target", target);
    lora.target = parse_lora_target(target);
    lora.lr = c.method.optimizer.lr;
    c.method.lora = lora;
  } else {
    c.method.lora.reset();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t config_digest(const ExperimentConfig& config) { return fnv1a64(to_json(config).dump()); }

namespace {

void collect(const Json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      collect(value, path, out);
    } else {
      out.push_back(path);
    }
  }
}

}  // namespace

std::vector<std::string> leaf_paths(const Json& json) {
  std::vector<std::string> out;
  collect(json, "", out);
  return out;
}

void apply_override(Json& json, const std::string& path, const std::string& text) {
  Json::json_pointer ptr("/" + [&] {
    std::string p = path;
    for (auto& ch : p) {
      if (ch == '.') ch = '/';
    }
    return p;
  }());
  if (!json.contains(ptr)) throw ConfigError("unknown config field '" + path + "'");
  Json& leaf = json[ptr];
  try {
    if (leaf.is_string()) {
      leaf = text;
    } else if (text == "null") {
      leaf = nullptr;
    } else if (leaf.is_boolean()) {
      if (text != "true" && text != "false") throw ConfigError("expected true or false");
      leaf = text == "true";
    } else if (leaf.is_number_unsigned() || (leaf.is_null() && text.find_first_not_of("0123456789") == std::string::npos)) {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(text, &used);
      if (used != text.size() || text.front() == '-') throw ConfigError("expected a non-negative integer");
      leaf = static_cast<std::uint64_t>(v);
    } else if (leaf.is_number()) {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw ConfigError("expected a number");
      leaf = v;
    } else {
      leaf = text;
    }
  } catch (const std::logic_error& e) {
    throw ConfigError("bad value '" + text + "' for config field '" + path + "': " + e.what());
  }
}

}  // namespace smf
