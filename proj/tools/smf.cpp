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

// smf: command-line driver for pretraining, streaming and sweeps.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smf/harness.hpp"

namespace {

using smf::Json;

// --config plus one --<dotted.path> flag per config leaf.
struct ConfigFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app, bool seed_required) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    seed_opt = app->add_option("--seed", seed, "experiment seed");
    if (seed_required) seed_opt->required();
    for (const auto& path : smf::leaf_paths(smf::to_json(smf::ExperimentConfig{}))) {
      if (path == "seed") continue;
      options[path] = app->add_option("--" + path, values[path], "override " + path)->group("Config overrides");
    }
  }

  // Defaults come from `base`; the file and flags are layered on top.
  smf::ExperimentConfig resolve(const smf::ExperimentConfig& base) const {
    Json j = smf::to_json(base);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      Json file;
      try {
        file = Json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw smf::ConfigError("cannot parse " + config_path + ": " + e.what());
      }
      smf::config_from_json(file);  // rejects unknown keys
      j.merge_patch(file);
    }
    for (const auto& [path, opt] : options) {
      if (opt->count() > 0) smf::apply_override(j, path, values.at(path));
    }
    if (seed_opt->count() > 0) j["seed"] = seed;
    return smf::config_from_json(j);
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw smf::ConfigError("cannot write " + path);
  out << text;
}

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path.empty()) return nullptr;
  auto out = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*out) throw smf::ConfigError("cannot write " + path);
  return out;
}

// Streaming runs take the model and data sections from the checkpoint.
smf::ExperimentConfig stream_config(const ConfigFlags& flags, const smf::Checkpoint& ckpt) {
  smf::ExperimentConfig cfg = flags.resolve(ckpt.config);
  const Json got = smf::to_json(cfg), want = smf::to_json(ckpt.config);
  for (const char* key : {"model", "data"}) {
    if (got[key] != want[key]) {
      throw smf::ConfigError(std::string("config section '") + key + "' does not match the checkpoint");
    }
  }
  cfg.validate();
  return cfg;
}

int cmd_pretrain(const ConfigFlags& flags, const std::string& out) {
  smf::ExperimentConfig cfg = flags.resolve(smf::ExperimentConfig{});
  cfg.validate();
  const auto data = smf::generate_fact_universe(cfg.data);
  try {
    auto result = smf::pretrain_base(data, cfg, &std::cerr);
    smf::save_checkpoint(out, result.checkpoint);
    const auto& last = result.curve.back();
    Json summary = {{"checkpoint", out},
                    {"steps", last.step},
                    {"heldout_acc", last.heldout_acc},
                    {"heldout_nll", last.heldout_nll},
                    {"background_batches", result.checkpoint.store.num_batches()}};
    std::cout << summary.dump() << '\n';
  } catch (const smf::PretrainFailure& e) {
    for (const auto& pt : e.curve) {
      std::cerr << "curve step " << pt.step << " loss " << pt.train_loss << " acc " << pt.heldout_acc << " nll "
                << pt.heldout_nll << '\n';
    }
    throw;
  }
  return 0;
}

int cmd_stream(const ConfigFlags& flags, const std::string& ckpt_path, const std::string& metrics_path,
               const std::string& steps_path) {
  const auto ckpt = smf::load_checkpoint(ckpt_path);
  const auto cfg = stream_config(flags, ckpt);
  const auto data = smf::generate_fact_universe(cfg.data);
  const auto stream = smf::select_stream(data, cfg.stream, cfg.seed);
  const auto store = smf::background_store(cfg.stream.background, ckpt, data, stream);

  auto metrics = open_out(metrics_path);
  auto steps = open_out(steps_path);
  smf::StreamOptions options;
  options.seed = cfg.seed;
  options.metrics = metrics.get();
  options.step_log = steps.get();
  auto model = ckpt.model;
  const auto result = smf::run_continual_stream(model, data, stream, cfg.stream, cfg.method, &store, options);
  const auto& last = result.reports.back();
  std::cerr << "stream " << smf::describe(cfg.method) << ": " << last.to_json() << '\n';
  return 0;
}

// A grid file holds a JSON array of "method" sections.
std::vector<smf::MethodSpec> load_grid(const std::string& path, const smf::ExperimentConfig& base) {
  std::ifstream in(path);
  Json grid;
  try {
    grid = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw smf::ConfigError("cannot parse grid " + path + ": " + e.what());
  }
  if (!grid.is_array()) throw smf::ConfigError("grid file must hold a JSON array of method objects");
  std::vector<smf::MethodSpec> specs;
  for (const auto& entry : grid) {
    Json j = smf::to_json(base);
    j["method"].merge_patch(entry);
    if (entry.contains("t")) j["method"]["t"] = entry["t"];
    specs.push_back(smf::config_from_json(j).method);
  }
  return specs;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& ckpt_path, const std::string& grid_path,
              const std::string& out_path) {
  const auto ckpt = smf::load_checkpoint(ckpt_path);
  const auto cfg = stream_config(flags, ckpt);
  const auto data = smf::generate_fact_universe(cfg.data);
  const auto stream = smf::select_stream(data, cfg.stream, cfg.seed);
  const auto store = smf::background_store(cfg.stream.background, ckpt, data, stream);
  const auto grid = load_grid(grid_path, cfg);
  const auto rows = smf::pareto_sweep(grid, ckpt.model, data, stream, cfg.stream, store, cfg.seed, &std::cerr);
  std::ostringstream csv;
  csv << smf::SweepRow::csv_header() << '\n';
  for (const auto& r : rows) csv << r.to_csv() << '\n';
  write_file(out_path, csv.str());
  return 0;
}

int cmd_ablate(const ConfigFlags& flags, const std::string& ckpt_path, const std::vector<std::size_t>& ts,
               const std::string& out_path) {
  const auto ckpt = smf::load_checkpoint(ckpt_path);
  const auto cfg = stream_config(flags, ckpt);
  const auto data = smf::generate_fact_universe(cfg.data);
  const auto stream = smf::select_stream(data, cfg.stream, cfg.seed);

  std::vector<smf::ArmResult> arms;
  auto run = [&](const std::string& label, const smf::MethodSpec& spec, const smf::BackgroundIndexStore& store) {
    std::cerr << "ablate " << label << " " << smf::describe(spec) << '\n';
    arms.push_back(smf::run_arm(label, ckpt.model, data, stream, cfg.stream, spec, &store, cfg.seed));
  };

  smf::MethodSpec sparse = cfg.method;
  sparse.method = smf::Method::sparse_memory;
  sparse.lora.reset();
  if (!sparse.t) sparse.t = 25;
  const auto pretrain_store = smf::background_store(smf::BackgroundCorpus::pretrain, ckpt, data, stream);
  for (std::size_t t : ts) {
    smf::MethodSpec tfidf = sparse, tf = sparse;
    tfidf.t = t;
    tf.method = smf::Method::memory_tf_only;
    tf.t = t;
    run("ranking=tfidf", tfidf, pretrain_store);
    run("ranking=tf_only", tf, pretrain_store);
  }
  smf::MethodSpec all = sparse;
  all.method = smf::Method::memory_all;
  all.t.reset();
  run("ranking=all", all, pretrain_store);
  for (auto corpus : {smf::BackgroundCorpus::pretrain, smf::BackgroundCorpus::filler, smf::BackgroundCorpus::stream}) {
    const auto store = smf::background_store(corpus, ckpt, data, stream);
    run("background=" + std::string(smf::background_name(corpus)), sparse, store);
  }

  std::ostringstream csv;
  csv << smf::ArmResult::csv_header() << '\n';
  for (const auto& a : arms) csv << a.to_csv() << '\n';
  write_file(out_path, csv.str());
  return 0;
}

int cmd_coreset(const ConfigFlags& flags, const std::string& ckpt_path, std::size_t n_facts, const std::string& set,
                const std::string& out_path) {
  const auto ckpt = smf::load_checkpoint(ckpt_path);
  const auto cfg = stream_config(flags, ckpt);
  const auto data = smf::generate_fact_universe(cfg.data);
  std::vector<smf::FactRecord> facts;
  if (set == "stream") {
    facts = smf::select_stream(data, cfg.stream, cfg.seed);
  } else if (set == "pretrain") {
    facts = data.pretrain_facts;
  } else {
    throw smf::ConfigError("unknown fact set '" + set + "' (pretrain, stream)");
  }
  if (n_facts < facts.size()) facts.resize(n_facts);
  auto out = open_out(out_path);
  std::ostream& os = out ? *out : std::cout;
  for (const auto& fact : facts) {
    const auto core = smf::compute_core_set(ckpt.model, fact);
    Json j = {{"fact_id", fact.fact_id}, {"core_size", core.indices.size()}, {"core", core.indices},
              {"per_token", core.per_token}};
    os << j.dump() << '\n';
  }
  return 0;
}

// Flattens metrics JSON-lines files into one CSV, one row per record.
int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::ostringstream csv;
  std::vector<std::string> columns;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw smf::ConfigError("cannot read " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      Json rec;
      try {
        rec = Json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw smf::ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (columns.empty()) {
        for (const auto& [key, _] : rec.items()) columns.push_back(key);
        csv << "source";
        for (const auto& c : columns) csv << ',' << c;
        csv << '\n';
      }
      csv << path;
      for (const auto& c : columns) csv << ',' << (rec.contains(c) ? rec[c].dump() : "");
      csv << '\n';
    }
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    write_file(out_path, csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse memory finetuning experiments"};
  app.require_subcommand(1);

  ConfigFlags pretrain_flags, stream_flags, sweep_flags, ablate_flags, coreset_flags;
  std::string out, checkpoint, metrics, steps_log, grid, set = "stream";
  std::size_t n_facts = 10;
  std::vector<std::size_t> ts{25, 100, 500};
  std::vector<std::string> inputs;

  auto* pretrain = app.add_subcommand("pretrain", "train the base model and write a checkpoint");
  pretrain_flags.attach(pretrain, true);
  pretrain->add_option("--out", out, "checkpoint path")->required();

  auto* stream = app.add_subcommand("stream", "run one method over the fact stream");
  stream_flags.attach(stream, true);
  stream->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  stream->add_option("--metrics", metrics, "JSON-lines evaluation reports")->required();
  stream->add_option("--step-log", steps_log, "JSON-lines per-step reports");

  auto* sweep = app.add_subcommand("sweep", "run a grid of methods");
  sweep_flags.attach(sweep, false);
  sweep->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  sweep->add_option("--grid", grid, "JSON array of method objects")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "CSV path")->required();

  auto* ablate = app.add_subcommand("ablate", "ranking and background-corpus arms");
  ablate_flags.attach(ablate, false);
  ablate->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  ablate->add_option("--t", ts, "trainable index counts for the ranking arms")->delimiter(',');
  ablate->add_option("--out", out, "CSV path")->required();

  auto* coreset = app.add_subcommand("coreset", "dump core sets of facts");
  coreset_flags.attach(coreset, false);
  coreset->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  coreset->add_option("--n-facts", n_facts);
  coreset->add_option("--set", set, "pretrain or stream");
  coreset->add_option("--out", out, "JSON-lines path (stdout if omitted)");

  auto* report = app.add_subcommand("report", "flatten metrics files into CSV");
  report->add_option("inputs", inputs, "metrics JSON-lines files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out, "CSV path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed()) return cmd_pretrain(pretrain_flags, out);
    if (stream->parsed()) return cmd_stream(stream_flags, checkpoint, metrics, steps_log);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, checkpoint, grid, out);
    if (ablate->parsed()) return cmd_ablate(ablate_flags, checkpoint, ts, out);
    if (coreset->parsed()) return cmd_coreset(coreset_flags, checkpoint, n_facts, set, out);
    if (report->parsed()) return cmd_report(inputs, out);
  } catch (const smf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
