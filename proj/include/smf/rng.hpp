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
#include <utility>

namespace smf {

struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;
};

// Counter-based generator: draw i of (seed, stream) is a pure hash of the
// triple, so any draw can be reproduced without replaying the sequence.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : state_{seed, stream, 0} {}
  explicit CounterRng(RngState state) : state_(state) {}

  static std::uint64_t hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

  std::uint64_t next_u64() { return hash(state_.seed, state_.stream, state_.counter++); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller; consumes two draws.
  double normal();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  // Derive an independent generator for a named sub-stream.
  CounterRng split(std::uint64_t stream) const { return CounterRng(hash(state_.seed, state_.stream, ~stream), stream); }

  const RngState& state() const { return state_; }

 private:
  RngState state_;
};

template <typename It>
void shuffle(It first, It last, CounterRng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace smf
