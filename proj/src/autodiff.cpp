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

#include "smf/autodiff.hpp"

#include <string>

namespace smf {

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  auto& node = nodes_.emplace_back();
  node.owned = std::move(value);
  node.view = &node.owned;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::parameter(Parameter<T>& p) {
  auto& node = nodes_.emplace_back();
  node.view = &p.value;
  node.param = &p;
  node.requires_grad = record_ && p.trainable;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::parameter(const Parameter<T>& p) {
  auto& node = nodes_.emplace_back();
  node.view = &p.value;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  if (record_) {
    for (auto in : inputs) needs = needs || nodes_[in.index].requires_grad;
  }
  auto& node = nodes_.emplace_back();
  node.owned = std::move(value);
  node.view = &node.owned;
  node.requires_grad = needs;
  if (needs) node.backward = std::move(backward);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Tensor<T>* Graph<T>::grad_sink(Var v) {
  auto& node = nodes_[v.index];
  if (!node.requires_grad) return nullptr;
  if (node.param != nullptr) return &node.param->grad;
  if (node.grad.empty()) node.grad = Tensor<T>(node.view->shape());
  return &node.grad;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (!record_) throw ContractError("backward on a graph built without recording");
  auto& root = nodes_[loss.index];
  if (root.view->size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(root.view->shape()));
  }
  if (!root.requires_grad) return;
  if (root.param != nullptr) {
    root.param->grad[0] += T{1};
    return;
  }
  if (root.grad.empty()) root.grad = Tensor<T>(root.view->shape());
  root.grad[0] += T{1};

  for (std::size_t i = loss.index + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, node.grad);
  }

  // Gradient routing: rows outside a parameter's mask keep no gradient.
  for (auto& node : nodes_) {
    auto* p = node.param;
    if (p == nullptr || !node.requires_grad || p->grad_row_mask.empty()) continue;
    const std::size_t cols = p->grad.cols();
    for (std::size_t r = 0; r < p->grad.rows(); ++r) {
      if (p->grad_row_mask[r]) continue;
      std::fill_n(p->grad.ptr() + r * cols, cols, T{0});
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace smf
