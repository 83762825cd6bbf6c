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

#include "smf/optim.hpp"

namespace smf {
namespace {

TEST(Sgd, ScalarStep) {
  Parameter<double> p("p", Tensor<double>::scalar(3.0));
  p.grad[0] = 2.0;
  sgd_update(p, 0.5);
  EXPECT_EQ(p.value.item(), 2.0);
  p.grad[0] = 0.0;
  sgd_update(p, 0.5);
  EXPECT_EQ(p.value.item(), 2.0);
}

TEST(Sgd, RowsOnly) {
  Parameter<double> p("p", Tensor<double>::matrix(3, 2, {1, 1, 1, 1, 1, 1}));
  p.grad.fill(1.0);
  std::vector<std::uint32_t> rows{1};
  sgd_update_rows(p, rows, 0.25);
  EXPECT_EQ(p.value.data()[0], 1.0);
  EXPECT_EQ(p.value(1, 0), 0.75);
  EXPECT_EQ(p.value(2, 1), 1.0);
}

TEST(AdamW, HandComputedSteps) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::adamw;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  Parameter<double> p("p", Tensor<double>::matrix(1, 2, {0.5, -1.5}));
  AdamWState<double> state;
  const double g1[2] = {0.2, -3.0}, g2[2] = {-0.1, 1.0};
  double theta[2] = {0.5, -1.5}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 2; ++t) {
    const double* g = t == 1 ? g1 : g2;
    for (int i = 0; i < 2; ++i) p.grad[static_cast<std::size_t>(i)] = g[i];
    state.update(p, cfg);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      theta[i] = theta[i] * (1 - 0.01 * 0.1) - 0.01 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p.value[static_cast<std::size_t>(i)], theta[i], 1e-12);
    }
  }
  EXPECT_EQ(state.dense_steps("p"), 2u);
}

TEST(AdamW, ZeroGradientOnlyDecays) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::adamw;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.1;
  Parameter<double> p("p", Tensor<double>::matrix(1, 3, {1.0, -2.0, 4.0}));
  AdamWState<double> state;
  Tensor<double> expect = p.value;
  for (int step = 0; step < 5; ++step) {
    state.update(p, cfg);
    for (auto& x : expect.data()) x *= (1 - 0.1 * 0.1);
    EXPECT_EQ(p.value, expect);
  }
}

TEST(AdamW, LazyRowsMatchDenseOnTouchedRows) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::adamw;
  cfg.lr = 0.05;
  Parameter<double> dense("v", Tensor<double>::matrix(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}));
  Parameter<double> sparse = dense;
  AdamWState<double> ds, ss;
  std::vector<std::uint32_t> rows{0, 2};
  for (int step = 0; step < 3; ++step) {
    dense.grad.fill(0.0);
    for (auto r : rows) {
      dense.grad(r, 0) = 0.3 * (step + 1);
      dense.grad(r, 1) = -0.2;
    }
    sparse.grad = dense.grad;
    ds.update(dense, cfg);
    ss.update_rows(sparse, rows, cfg);
  }
  EXPECT_EQ(ss.allocated_rows("v"), 2u);
  EXPECT_EQ(sparse.value, dense.value);
}

TEST(OptimizerConfig, Validation) {
  OptimizerConfig cfg;
  cfg.lr = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.lr = 1;
  cfg.weight_decay = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.weight_decay = 0;
  cfg.kind = OptimizerKind::adamw;
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace smf
