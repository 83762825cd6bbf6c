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

#include <gtest/gtest.h>

#include <cmath>

#include "smf/ranking.hpp"
#include "smf/rng.hpp"

namespace smf {
namespace {

BatchAccessCounts counts_of(std::map<std::uint32_t, std::uint64_t> m) { return BatchAccessCounts{std::move(m)}; }

// Separately coded evaluation of the ranking formula: plain loops, doc
// frequencies from a flat vector, log of a quotient taken as a difference.
double oracle_tfidf(std::uint64_t c, std::uint64_t total, std::uint64_t B, std::uint64_t df) {
  long double tf = static_cast<long double>(c) / static_cast<long double>(total);
  long double idf = std::log(static_cast<long double>(B) + 1.0L) - std::log(static_cast<long double>(df) + 1.0L);
  return static_cast<double>(tf * idf);
}

TEST(TfIdf, WorkedExample) {
  // c(i)=5 of 50 total accesses; B=9 background batches; index in 4 of them.
  BackgroundIndexStore store({{1, 4}, {2, 9}}, 9, "test");
  auto scores = tfidf_scores(counts_of({{1, 5}, {2, 45}}), store);
  EXPECT_EQ(scores.at(1), 0.1 * std::log(2.0));
  EXPECT_NEAR(scores.at(1), 0.0693147, 1e-7);
  EXPECT_EQ(scores.at(2), 0.0);
}

TEST(TfIdf, UnseenIndexGetsMaximumIdf) {
  BackgroundIndexStore store({{1, 2}}, 4, "test");
  auto scores = tfidf_scores(counts_of({{1, 1}, {3, 1}}), store);
  EXPECT_NEAR(scores.at(3), 0.5 * std::log(5.0), 1e-15);
  EXPECT_EQ(scores.count(7), 0u);
  EXPECT_TRUE(tfidf_scores(counts_of({}), store).empty());
}

TEST(TfIdf, MatchesIndependentOracle) {
  CounterRng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t B = 1 + rng.below(200);
    std::map<std::uint32_t, std::uint32_t> df;
    std::map<std::uint32_t, std::uint64_t> counts;
    const std::size_t n = 1 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::uint32_t>(rng.below(4096));
      counts[idx] += 1 + rng.below(20);
      if (rng.uniform() < 0.7) df[idx] = static_cast<std::uint32_t>(1 + rng.below(B));
    }
    BackgroundIndexStore store(df, B, "random");
    std::uint64_t total = 0;
    for (const auto& [_, c] : counts) total += c;
    auto scores = tfidf_scores(counts_of(counts), store);
    ASSERT_EQ(scores.size(), counts.size());
    for (const auto& [idx, c] : counts) {
      const std::uint64_t d = df.count(idx) ? df[idx] : 0;
      EXPECT_NEAR(scores.at(idx), oracle_tfidf(c, total, B, d), 1e-12);
    }
  }
}

TEST(TfOnly, Examples) {
  auto s = tf_only_scores(counts_of({{1, 3}, {2, 1}}));
  EXPECT_EQ(s.at(1), 0.75);
  EXPECT_EQ(s.at(2), 0.25);
  EXPECT_EQ(tf_only_scores(counts_of({{9, 4}})).at(9), 1.0);
  auto u = tf_only_scores(counts_of({{1, 2}, {5, 2}, {8, 2}, {9, 2}, {11, 2}}));
  for (const auto& [_, v] : u) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(SelectTopT, Examples) {
  auto s = select_top_t({{2, 0.5}, {7, 0.2}, {9, 0.0}}, 2);
  EXPECT_EQ(s.indices, (std::vector<std::uint32_t>{2, 7}));
  EXPECT_EQ(s.t_requested, 2u);
  auto tied = select_top_t({{8, 0.3}, {4, 0.3}, {6, 0.1}}, 3);
  EXPECT_EQ(tied.indices, (std::vector<std::uint32_t>{4, 8, 6}));
  auto clamp = select_top_t({{1, 0.1}, {2, 0.2}, {3, 0.3}, {4, 0.4}}, 10);
  EXPECT_EQ(clamp.size(), 4u);
  EXPECT_EQ(clamp.indices, (std::vector<std::uint32_t>{4, 3, 2, 1}));
  EXPECT_THROW(select_top_t({{1, 0.1}}, 0), ConfigError);
}

TEST(SelectTopT, OrderInvariants) {
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    IndexScores scores;
    for (int i = 0; i < 40; ++i) scores[static_cast<std::uint32_t>(rng.below(100))] = 0.1 * static_cast<double>(rng.below(5));
    const std::size_t t = 1 + rng.below(50);
    auto set = select_top_t(scores, t);
    EXPECT_EQ(set.size(), std::min(t, scores.size()));
    for (std::size_t i = 1; i < set.size(); ++i) {
      EXPECT_GE(set.scores[i - 1], set.scores[i]);
      if (set.scores[i - 1] == set.scores[i]) EXPECT_LT(set.indices[i - 1], set.indices[i]);
    }
  }
}

TEST(Ranking, ScaleInvarianceOfSelection) {
  CounterRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint64_t B = 50;
    std::map<std::uint32_t, std::uint32_t> df;
    std::map<std::uint32_t, std::uint64_t> counts, scaled;
    for (int i = 0; i < 30; ++i) {
      const auto idx = static_cast<std::uint32_t>(rng.below(500));
      counts[idx] += 1 + rng.below(5);
      df[idx] = static_cast<std::uint32_t>(1 + rng.below(B));
    }
    const std::uint64_t factor = 2 + rng.below(7);
    for (const auto& [i, c] : counts) scaled[i] = c * factor;
    BackgroundIndexStore store(df, B, "s");
    auto a = select_top_t(tfidf_scores(counts_of(counts), store), 10);
    auto b = select_top_t(tfidf_scores(counts_of(scaled), store), 10);
    EXPECT_EQ(a.indices, b.indices);
  }
}

TEST(Ranking, MonotoneInCount) {
  BackgroundIndexStore store({{1, 3}, {2, 3}, {3, 1}}, 10, "m");
  std::map<std::uint32_t, std::uint64_t> counts{{1, 2}, {2, 3}, {3, 1}};
  auto rank_of = [&](std::uint32_t idx) {
    auto set = select_top_t(tfidf_scores(counts_of(counts), store), 3);
    return std::find(set.indices.begin(), set.indices.end(), idx) - set.indices.begin();
  };
  auto before = rank_of(1);
  for (int step = 0; step < 5; ++step) {
    counts[1] += 1;
    auto after = rank_of(1);
    EXPECT_LE(after, before);
    before = after;
  }
}

TEST(BackgroundStore, FromBatchCounts) {
  std::vector<BatchAccessCounts> one{counts_of({{5, 3}})};
  auto s1 = BackgroundIndexStore::from_batch_counts(one, "one");
  EXPECT_EQ(s1.entries(), (std::map<std::uint32_t, std::uint32_t>{{5, 1}}));
  EXPECT_EQ(s1.num_batches(), 1u);

  std::vector<BatchAccessCounts> three{counts_of({{1, 1}, {2, 4}}), counts_of({{2, 1}, {3, 2}}),
                                       counts_of({{2, 7}, {3, 1}, {9, 1}})};
  auto s3 = BackgroundIndexStore::from_batch_counts(three, "three");
  EXPECT_EQ(s3.entries(), (std::map<std::uint32_t, std::uint32_t>{{1, 1}, {2, 3}, {3, 2}, {9, 1}}));
  EXPECT_EQ(s3.doc_freq(2), s3.num_batches());
  EXPECT_EQ(tfidf_scores(counts_of({{2, 5}, {1, 1}}), s3).at(2), 0.0);
  EXPECT_THROW(BackgroundIndexStore::from_batch_counts({}, "empty"), ConfigError);
}

TEST(BackgroundStore, RejectsOutOfRangeDocFreq) {
  EXPECT_THROW(BackgroundIndexStore({{1, 0}}, 3, "x"), ConfigError);
  EXPECT_THROW(BackgroundIndexStore({{1, 4}}, 3, "x"), ConfigError);
}

TEST(BackgroundStore, SerializationRoundTrip) {
  BackgroundIndexStore store({{1, 2}, {40, 1}, {4095, 7}}, 7, "filler");
  auto bytes = store.serialize();
  auto back = BackgroundIndexStore::deserialize(bytes);
  EXPECT_EQ(back, store);
  EXPECT_EQ(back.serialize(), bytes);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(BackgroundIndexStore::deserialize(bytes), Error);
}

}  // namespace
}  // namespace smf
