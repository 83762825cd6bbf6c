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

#include "smf/optim.hpp"

#include <cmath>

namespace smf {

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (kind == OptimizerKind::adamw) {
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("AdamW betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("AdamW eps must be positive");
  }
  if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be non-negative");
}

template <typename T>
void sgd_update(Parameter<T>& p, double lr) {
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= step * p.grad[i];
}

template <typename T>
void sgd_update_rows(Parameter<T>& p, std::span<const std::uint32_t> rows, double lr) {
  const T step = static_cast<T>(lr);
  const std::size_t cols = p.value.cols();
  for (auto r : rows) {
    T* v = p.value.ptr() + r * cols;
    const T* g = p.grad.ptr() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) v[c] -= step * g[c];
  }
}

namespace {

template <typename T>
void adamw_apply(T* value, const T* grad, T* m, T* v, std::size_t n, std::size_t step, const OptimizerConfig& cfg) {
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  const T lr = static_cast<T>(cfg.lr);
  const T decay = static_cast<T>(1.0 - cfg.lr * cfg.weight_decay);
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T{1} - b1) * grad[i];
    v[i] = b2 * v[i] + (T{1} - b2) * grad[i] * grad[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    value[i] *= decay;
    value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

template <typename T>
void AdamWState<T>::update(Parameter<T>& p, const OptimizerConfig& cfg) {
  auto& s = dense_[p.id];
  if (s.m.empty()) {
    s.m.assign(p.value.size(), T{0});
    s.v.assign(p.value.size(), T{0});
  }
  ++s.step;
  adamw_apply(p.value.ptr(), p.grad.ptr(), s.m.data(), s.v.data(), p.value.size(), s.step, cfg);
}

template <typename T>
void AdamWState<T>::update_rows(Parameter<T>& p, std::span<const std::uint32_t> rows, const OptimizerConfig& cfg) {
  auto& table = rows_[p.id];
  const std::size_t cols = p.value.cols();
  for (auto r : rows) {
    auto& s = table[r];
    if (s.m.empty()) {
      s.m.assign(cols, T{0});
      s.v.assign(cols, T{0});
    }
    ++s.step;
    adamw_apply(p.value.ptr() + r * cols, p.grad.ptr() + r * cols, s.m.data(), s.v.data(), cols, s.step, cfg);
  }
}

template <typename T>
std::size_t AdamWState<T>::allocated_rows(const std::string& id) const {
  auto it = rows_.find(id);
  return it == rows_.end() ? 0 : it->second.size();
}

template <typename T>
std::size_t AdamWState<T>::dense_steps(const std::string& id) const {
  auto it = dense_.find(id);
  return it == dense_.end() ? 0 : it->second.step;
}

template void sgd_update<float>(Parameter<float>&, double);
template void sgd_update<double>(Parameter<double>&, double);
template void sgd_update_rows<float>(Parameter<float>&, std::span<const std::uint32_t>, double);
template void sgd_update_rows<double>(Parameter<double>&, std::span<const std::uint32_t>, double);
template class AdamWState<float>;
template class AdamWState<double>;

}  // namespace smf
