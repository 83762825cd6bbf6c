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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smf/autodiff.hpp"

namespace smf {

struct GradCheckReport {
  std::string parameter_id;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t num_entries_checked = 0;
  std::size_t num_entries_skipped = 0;
};

// Builds the scalar loss on the given graph from the current parameter values.
using LossBuilder = std::function<Var(Graph<double>&)>;

// Compares backward() against central differences (f(θ+ε) − f(θ−ε)) / 2ε on
// up to `sample_size` entries per parameter. Relative error is
// |a − n| / max(|a|, |n|, 1e-8). Half of the sample is drawn from entries with
// nonzero analytic gradient so sparse tables (memory values) are actually
// exercised; the rest is uniform. Parameter values are restored on return.
//
// Losses that route through a discrete choice (top-k slot selection) are only
// piecewise smooth. If `branch_key` is given it is read after every loss
// evaluation, and an entry whose ±ε evaluations report a different key than
// the unperturbed one is skipped, counted in num_entries_skipped, and replaced
// by a fresh uniform draw while attempts remain.
std::vector<GradCheckReport> finite_diff_check(const LossBuilder& loss_fn, std::span<Parameter<double>* const> params,
                                               double epsilon, std::size_t sample_size, std::uint64_t seed = 0,
                                               const std::function<std::uint64_t()>& branch_key = {});

}  // namespace smf
