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

#include "smf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "smf/rng.hpp"

namespace smf {
namespace {

double evaluate(const LossBuilder& loss_fn) {
  Graph<double> g(false);
  return g.value(loss_fn(g)).item();
}

std::vector<std::size_t> sample_entries(const Parameter<double>& p, std::size_t sample_size, CounterRng& rng) {
  const std::size_t n = p.value.size();
  std::vector<std::size_t> picked;
  if (n <= sample_size) {
    picked.resize(n);
    for (std::size_t i = 0; i < n; ++i) picked[i] = i;
    return picked;
  }
  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.grad[i] != 0.0) nonzero.push_back(i);
  }
  shuffle(nonzero.begin(), nonzero.end(), rng);
  const std::size_t from_nonzero = std::min(nonzero.size(), sample_size / 2);
  picked.assign(nonzero.begin(), nonzero.begin() + static_cast<std::ptrdiff_t>(from_nonzero));
  while (picked.size() < sample_size) {
    const std::size_t i = rng.below(n);
    if (std::find(picked.begin(), picked.end(), i) == picked.end()) picked.push_back(i);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

std::vector<GradCheckReport> finite_diff_check(const LossBuilder& loss_fn, std::span<Parameter<double>* const> params,
                                               double epsilon, std::size_t sample_size, std::uint64_t seed,
                                               const std::function<std::uint64_t()>& branch_key) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) throw ConfigError("finite_diff_check epsilon must lie in [1e-6, 1e-3]");

  for (auto* p : params) p->zero_grad();
  {
    Graph<double> g(true);
    g.backward(loss_fn(g));
  }
  const std::uint64_t base_key = branch_key ? branch_key() : 0;

  CounterRng rng(seed, 0x6772616463686b);
  auto same_branch = [&] { return !branch_key || branch_key() == base_key; };
  std::vector<GradCheckReport> reports;
  reports.reserve(params.size());
  for (auto* p : params) {
    GradCheckReport report{p->id, 0.0, 0.0, 0, 0};
    auto check = [&](std::size_t i) {
      const double original = p->value[i];
      p->value[i] = original + epsilon;
      const double plus = evaluate(loss_fn);
      const bool plus_same = same_branch();
      p->value[i] = original - epsilon;
      const double minus = evaluate(loss_fn);
      const bool minus_same = same_branch();
      p->value[i] = original;
      if (!plus_same || !minus_same) {
        ++report.num_entries_skipped;
        return;
      }

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = p->grad[i];
      const double abs_err = std::abs(analytic - numeric);
      const double rel_err = abs_err / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      report.max_relative_error = std::max(report.max_relative_error, rel_err);
      ++report.num_entries_checked;
    };
    auto tried = sample_entries(*p, sample_size, rng);
    for (std::size_t i : tried) check(i);
    // Skipped entries are replaced by fresh uniform draws, up to a bounded number of attempts.
    const std::size_t target = std::min(sample_size, p->value.size());
    for (std::size_t attempt = 0; report.num_entries_checked < target && tried.size() < p->value.size() &&
                                  attempt < 4 * sample_size;
         ++attempt) {
      const std::size_t i = rng.below(p->value.size());
      if (std::find(tried.begin(), tried.end(), i) != tried.end()) continue;
      tried.push_back(i);
      check(i);
    }
    reports.push_back(report);
  }
  return reports;
}

}  // namespace smf
