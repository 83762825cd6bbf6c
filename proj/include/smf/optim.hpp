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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "smf/tensor.hpp"

namespace smf {

enum class OptimizerKind { sgd, adamw };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 1.0;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient-norm clip; 0 disables it.
  double max_grad_norm = 0.0;

  void validate() const;
};

// θ ← θ − lr·g. No momentum, no decay.
template <typename T>
void sgd_update(Parameter<T>& p, double lr);
template <typename T>
void sgd_update_rows(Parameter<T>& p, std::span<const std::uint32_t> rows, double lr);

// Decoupled AdamW with bias correction. Dense parameters keep one moment
// pair per tensor; row updates allocate moments per row on first use and
// count steps per row, which matches dense zero-initialized moments for rows
// that are skipped rather than updated with a zero gradient.
template <typename T>
class AdamWState {
 public:
  void update(Parameter<T>& p, const OptimizerConfig& cfg);
  void update_rows(Parameter<T>& p, std::span<const std::uint32_t> rows, const OptimizerConfig& cfg);

  std::size_t allocated_rows(const std::string& id) const;
  std::size_t dense_steps(const std::string& id) const;

 private:
  struct Dense {
    std::vector<T> m, v;
    std::size_t step = 0;
  };
  struct Row {
    std::vector<T> m, v;
    std::size_t step = 0;
  };

  std::map<std::string, Dense> dense_;
  std::map<std::string, std::map<std::uint32_t, Row>> rows_;
};

extern template class AdamWState<float>;
extern template class AdamWState<double>;

}  // namespace smf
