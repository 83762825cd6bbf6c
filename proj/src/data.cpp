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

#include "smf/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

namespace smf {

Vocabulary Vocabulary::partition(std::size_t vocab_size) {
  if (vocab_size < 64) throw ConfigError("vocabulary of " + std::to_string(vocab_size) + " tokens is too small");
  Vocabulary v;
  v.size = vocab_size;
  const auto n = static_cast<std::uint32_t>(vocab_size);
  v.n_template = n / 16;
  v.n_relation = n / 32;
  v.n_object = n / 4;
  v.n_entity = n * 25 / 64;
  v.relation_begin = v.template_begin + v.n_template;
  v.entity_begin = v.relation_begin + v.n_relation;
  v.object_begin = v.entity_begin + v.n_entity;
  v.filler_begin = v.object_begin + v.n_object;
  v.n_filler = n - v.filler_begin;
  return v;
}

std::uint64_t Vocabulary::fact_capacity() const {
  return static_cast<std::uint64_t>(n_entity) * n_entity * n_relation;
}

void DataConfig::validate() const {
  if (n_templates == 0) throw ConfigError("n_templates must be positive");
  if (n_pretrain == 0 || n_stream == 0) throw ConfigError("both fact sets must be non-empty");
  if (filler_min_len < 2 || filler_max_len < filler_min_len) throw ConfigError("bad filler length range");
  if (n_filler == 0 || n_filler_eval == 0) throw ConfigError("filler corpora must be non-empty");
}

std::vector<std::uint32_t> StatementTemplate::render(std::span<const std::uint32_t> subject,
                                                     std::span<const std::uint32_t> relation,
                                                     std::span<const std::uint32_t> object) const {
  std::vector<std::uint32_t> out{Vocabulary::bos};
  out.insert(out.end(), prefix.begin(), prefix.end());
  auto first = relation_first ? relation : subject;
  auto second = relation_first ? subject : relation;
  out.insert(out.end(), first.begin(), first.end());
  out.insert(out.end(), second.begin(), second.end());
  out.push_back(Vocabulary::connector);
  out.insert(out.end(), object.begin(), object.end());
  if (suffix != 0) out.push_back(suffix);
  out.push_back(Vocabulary::eos);
  return out;
}

std::vector<std::uint32_t> FactRecord::question_with_answer() const {
  std::vector<std::uint32_t> out = question;
  out.insert(out.end(), object.begin(), object.end());
  out.push_back(Vocabulary::eos);
  return out;
}

namespace {

std::uint32_t pick(CounterRng& rng, std::uint32_t begin, std::uint32_t count) {
  return begin + static_cast<std::uint32_t>(rng.below(count));
}

std::vector<StatementTemplate> make_templates(const Vocabulary& v, std::size_t n, CounterRng& rng) {
  std::vector<StatementTemplate> out;
  std::set<std::vector<std::uint32_t>> seen;
  // Probe rendering with dummy slots so distinct templates render differently.
  const std::vector<std::uint32_t> s{v.entity_begin, v.entity_begin + 1}, r{v.relation_begin}, o{v.object_begin};
  std::size_t attempts = 0;
  while (out.size() < n) {
    if (++attempts > 100000) throw ConfigError("cannot build " + std::to_string(n) + " distinct templates");
    StatementTemplate t;
    const std::size_t len = 1 + rng.below(3);
    for (std::size_t i = 0; i < len; ++i) t.prefix.push_back(pick(rng, v.template_begin, v.n_template));
    // The first template keeps the question's subject-then-relation order.
    t.relation_first = !out.empty() && rng.uniform() < 0.3;
    t.suffix = rng.uniform() < 0.4 ? pick(rng, v.template_begin, v.n_template) : 0;
    if (seen.insert(t.render(s, r, o)).second) out.push_back(std::move(t));
  }
  return out;
}

std::vector<FactRecord> make_facts(const Vocabulary& v, const std::vector<StatementTemplate>& templates,
                                   std::size_t count, std::uint32_t first_id,
                                   std::set<std::pair<std::vector<std::uint32_t>, std::uint32_t>>& used,
                                   CounterRng& rng) {
  std::vector<FactRecord> out;
  out.reserve(count);
  while (out.size() < count) {
    FactRecord f;
    f.subject = {pick(rng, v.entity_begin, v.n_entity), pick(rng, v.entity_begin, v.n_entity)};
    f.relation = {pick(rng, v.relation_begin, v.n_relation)};
    if (!used.insert({f.subject, f.relation[0]}).second) continue;
    f.object = {pick(rng, v.object_begin, v.n_object)};
    f.fact_id = first_id + static_cast<std::uint32_t>(out.size());
    for (const auto& t : templates) f.statements.push_back(t.render(f.subject, f.relation, f.object));
    f.question = {Vocabulary::bos, Vocabulary::question};
    f.question.insert(f.question.end(), f.subject.begin(), f.subject.end());
    f.question.insert(f.question.end(), f.relation.begin(), f.relation.end());
    f.question.push_back(Vocabulary::connector);
    out.push_back(std::move(f));
  }
  return out;
}

// Sparse first-order Markov chain over filler and template words.
class FillerGrammar {
 public:
  FillerGrammar(const Vocabulary& v, CounterRng& rng) : v_(v) {
    for (std::uint32_t i = 0; i < v.n_filler; ++i) states_.push_back(v.filler_begin + i);
    for (std::uint32_t i = 0; i < v.n_template; ++i) states_.push_back(v.template_begin + i);
    next_.resize(states_.size());
    for (auto& succ : next_) {
      for (int j = 0; j < 3; ++j) succ.push_back(static_cast<std::uint32_t>(rng.below(states_.size())));
    }
  }

  std::vector<std::uint32_t> sample(std::size_t len, CounterRng& rng) const {
    std::vector<std::uint32_t> out{Vocabulary::bos};
    std::size_t state = rng.below(states_.size());
    while (out.size() + 1 < len) {
      out.push_back(states_[state]);
      // Favor the first successor so the chain is learnable but not deterministic.
      const double u = rng.uniform();
      const auto& succ = next_[state];
      state = succ[u < 0.6 ? 0 : (u < 0.85 ? 1 : 2)];
    }
    out.push_back(Vocabulary::eos);
    return out;
  }

 private:
  Vocabulary v_;
  std::vector<std::uint32_t> states_;
  std::vector<std::vector<std::uint32_t>> next_;
};

}  // namespace

FactDataset generate_fact_universe(const DataConfig& config) {
  config.validate();
  FactDataset d;
  d.config = config;
  d.seed = config.seed;
  d.vocab = Vocabulary::partition(config.vocab_size);
  const std::uint64_t needed = config.n_pretrain + config.n_stream;
  if (needed > d.vocab.fact_capacity() / 2) {
    throw ConfigError("vocabulary of " + std::to_string(config.vocab_size) + " tokens cannot hold " +
                      std::to_string(needed) + " disjoint facts (capacity " +
                      std::to_string(d.vocab.fact_capacity()) + ")");
  }
  CounterRng root(config.seed, 0x64617461);
  CounterRng trng = root.split(1), frng = root.split(2), grng = root.split(3), srng = root.split(4);
  d.templates = make_templates(d.vocab, config.n_templates, trng);
  std::set<std::pair<std::vector<std::uint32_t>, std::uint32_t>> used;
  d.pretrain_facts = make_facts(d.vocab, d.templates, config.n_pretrain, 0, used, frng);
  d.stream_facts =
      make_facts(d.vocab, d.templates, config.n_stream, static_cast<std::uint32_t>(config.n_pretrain), used, frng);
  FillerGrammar grammar(d.vocab, grng);
  auto sample_len = [&] { return config.filler_min_len + srng.below(config.filler_max_len - config.filler_min_len + 1); };
  for (std::size_t i = 0; i < config.n_filler; ++i) d.filler_corpus.push_back(grammar.sample(sample_len(), srng));
  for (std::size_t i = 0; i < config.n_filler_eval; ++i) d.filler_eval.push_back(grammar.sample(sample_len(), srng));
  return d;
}

FactDataset generate_fact_universe(std::uint64_t seed, std::size_t n_pretrain, std::size_t n_stream,
                                   std::size_t n_templates) {
  DataConfig c;
  c.seed = seed;
  c.n_pretrain = n_pretrain;
  c.n_stream = n_stream;
  c.n_templates = n_templates;
  return generate_fact_universe(c);
}

Batch fact_batch(const FactRecord& fact, std::size_t batch_size, std::size_t seq_len) {
  if (fact.statements.empty()) throw ConfigError("fact has no statements");
  std::vector<std::vector<std::uint32_t>> rows;
  rows.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) rows.push_back(fact.statements[i % fact.statements.size()]);
  return make_batch(rows, seq_len);
}

std::size_t PretrainMix::qa_fact_count(std::size_t n_facts) const {
  const auto n = static_cast<std::size_t>(std::llround(qa_fact_fraction * static_cast<double>(n_facts)));
  return std::clamp<std::size_t>(n, n_facts == 0 ? 0 : 1, n_facts);
}

Batch pretrain_batch(const FactDataset& data, const PretrainMix& mix, std::size_t batch_size, std::size_t seq_len,
                     CounterRng& rng) {
  std::vector<std::vector<std::uint32_t>> rows;
  rows.reserve(batch_size);
  const auto& facts = data.pretrain_facts;
  const std::size_t n_qa = mix.qa_fact_count(facts.size());
  for (std::size_t i = 0; i < batch_size; ++i) {
    const double u = rng.uniform();
    if (u < mix.statement_fraction) {
      const auto& f = facts[rng.below(facts.size())];
      rows.push_back(f.statements[rng.below(f.statements.size())]);
    } else if (u < mix.statement_fraction + mix.question_fraction) {
      rows.push_back(facts[rng.below(n_qa)].question_with_answer());
    } else {
      rows.push_back(data.filler_corpus[rng.below(data.filler_corpus.size())]);
    }
  }
  return make_batch(rows, seq_len);
}

std::vector<Batch> chunk_batches(std::span<const std::vector<std::uint32_t>> sequences, std::size_t batch_size,
                                 std::size_t seq_len) {
  std::vector<Batch> out;
  for (std::size_t i = 0; i < sequences.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, sequences.size() - i);
    out.push_back(make_batch(sequences.subspan(i, n), seq_len));
  }
  return out;
}

}  // namespace smf
