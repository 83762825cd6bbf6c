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
#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

#include "smf/tensor.hpp"

namespace smf {

// Handle to a node on a Graph tape.
struct Var {
  std::uint32_t index = 0;
};

// Dynamically recorded reverse-mode tape.
//
// Nodes are appended in execution order, so reverse iteration is a valid
// topological order for backward. Parameter leaves alias the Parameter's
// storage; gradients for trainable parameters accumulate directly into
// Parameter::grad. A graph built with recording disabled keeps only values,
// which is what evaluation uses.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor<T> value);
  Var parameter(Parameter<T>& p);
  // Read-only leaf; never receives gradient.
  Var parameter(const Parameter<T>& p);

  const Tensor<T>& value(Var v) const { return *nodes_[v.index].view; }
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Appends an op result. `backward` runs only if some input requires grad.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward);

  // Gradient buffer to accumulate into for `v`, or nullptr if `v` needs none.
  Tensor<T>* grad_sink(Var v);

  // Accumulates d(loss)/d(node) into every reachable trainable Parameter.
  void backward(Var loss);

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* view = nullptr;
    Parameter<T>* param = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  std::deque<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace smf
