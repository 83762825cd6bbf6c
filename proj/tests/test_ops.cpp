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

#include "smf/ops.hpp"
#include "smf/rng.hpp"

namespace smf {
namespace {

Tensor<double> random_matrix(std::size_t r, std::size_t c, CounterRng& rng) {
  Tensor<double> t = Tensor<double>::zeros(r, c);
  for (auto& x : t.data()) x = rng.normal();
  return t;
}

TEST(Matmul, IdentityAndHandCase) {
  Graph<double> g(false);
  Var i2 = g.constant(Tensor<double>::matrix(2, 2, {1, 0, 0, 1}));
  Var m = g.constant(Tensor<double>::matrix(2, 2, {2, 3, 5, 7}));
  EXPECT_EQ(g.value(matmul(g, i2, m)), g.value(m));
  Var a = g.constant(Tensor<double>::matrix(1, 2, {1, 2}));
  Var b = g.constant(Tensor<double>::matrix(2, 1, {3, 4}));
  EXPECT_EQ(g.value(matmul(g, a, b)).item(), 11.0);
}

TEST(Matmul, TripleLoopOracle) {
  CounterRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_matrix(3, 4, rng);
    auto b = random_matrix(4, 2, rng);
    Graph<double> g(false);
    const auto& out = g.value(matmul(g, g.constant(a), g.constant(b)));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
        EXPECT_NEAR(out(i, j), s, 1e-12);
      }
    }
  }
}

TEST(Matmul, ShapeMismatchNamesShapes) {
  Graph<double> g(false);
  Var a = g.constant(Tensor<double>::zeros(2, 3));
  Var b = g.constant(Tensor<double>::zeros(2, 3));
  try {
    matmul(g, a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Matmul, TransposedKernelsAgree) {
  CounterRng rng(2);
  auto a = random_matrix(5, 3, rng);
  auto b = random_matrix(4, 3, rng);
  Tensor<double> nt = Tensor<double>::zeros(5, 4);
  kernels::gemm_nt(a.ptr(), b.ptr(), nt.ptr(), 5, 3, 4, false);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(j, k);
      EXPECT_NEAR(nt(i, j), s, 1e-12);
    }
  }
  auto c = random_matrix(3, 4, rng);
  Tensor<double> tn = Tensor<double>::zeros(5, 4);
  auto a2 = random_matrix(3, 5, rng);
  kernels::gemm_tn(a2.ptr(), c.ptr(), tn.ptr(), 3, 5, 4, false);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a2(k, i) * c(k, j);
      EXPECT_NEAR(tn(i, j), s, 1e-12);
    }
  }
}

TEST(Softmax, ClosedFormCases) {
  Graph<double> g(false);
  Var x = g.constant(Tensor<double>::matrix(3, 3, {0, 0, 0, 1000, 1000, -1e300, 0, std::log(3.0), -INFINITY}));
  const auto& s = g.value(softmax_rows(g, x));
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(s(0, j), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(s(1, 1), 0.5, 1e-15);
  EXPECT_NEAR(s(2, 0), 0.25, 1e-15);
  EXPECT_NEAR(s(2, 1), 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOne) {
  CounterRng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_matrix(4, 9, rng);
    for (auto& v : x.data()) v *= 30.0;
    Graph<float> g(false);
    const auto& s = g.value(softmax_rows(g, g.constant(x.cast<float>())));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (float v : s.row(r)) total += v;
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Silu, ScalarValues) {
  Graph<double> g(false);
  const auto& y = g.value(silu(g, g.constant(Tensor<double>::matrix(1, 3, {0.0, 1.0, 40.0}))));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(y[1], 0.731059, 1e-6);
  EXPECT_NEAR(y[2], 40.0, 1e-12);
}

TEST(CrossEntropy, UniformLogits) {
  Graph<double> g(false);
  std::vector<std::uint32_t> targets{2};
  std::vector<std::uint8_t> mask{1};
  Var loss = cross_entropy_masked(g, g.constant(Tensor<double>::zeros(1, 4)), targets, mask);
  EXPECT_NEAR(g.value(loss).item(), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, MarginDrivesLossToZero) {
  double previous = 1e9;
  for (double margin : {1.0, 5.0, 20.0, 60.0}) {
    Graph<double> g(false);
    std::vector<std::uint32_t> targets{1};
    std::vector<std::uint8_t> mask{1};
    Var loss = cross_entropy_masked(g, g.constant(Tensor<double>::matrix(1, 3, {0, margin, 0})), targets, mask);
    const double l = g.value(loss).item();
    EXPECT_LT(l, previous);
    previous = l;
  }
  EXPECT_LT(previous, 1e-20);
}

TEST(CrossEntropy, MaskedPositionIgnored) {
  // Position 0 is masked out; loss equals the NLL of position 1 alone.
  Parameter<double> logits("logits", Tensor<double>::matrix(2, 3, {5, -2, 0.5, 0.1, 0.2, 0.3}));
  Graph<double> g(true);
  std::vector<std::uint32_t> targets{0, 2};
  std::vector<std::uint8_t> mask{0, 1};
  Var loss = cross_entropy_masked(g, g.parameter(logits), targets, mask);
  const double expect = -0.3 + std::log(std::exp(0.1) + std::exp(0.2) + std::exp(0.3));
  EXPECT_NEAR(g.value(loss).item(), expect, 1e-14);
  g.backward(loss);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(logits.grad(0, j), 0.0);
  EXPECT_NE(logits.grad(1, 2), 0.0);
}

TEST(CrossEntropy, AllMaskedThrows) {
  Graph<double> g(false);
  std::vector<std::uint32_t> targets{0, 1};
  std::vector<std::uint8_t> mask{0, 0};
  EXPECT_THROW(cross_entropy_masked(g, g.constant(Tensor<double>::zeros(2, 3)), targets, mask), EmptyLossError);
}

TEST(Backward, SumAndSquare) {
  Parameter<double> p("p", Tensor<double>::matrix(1, 3, {1, 2, 3}));
  {
    Graph<double> g;
    g.backward(sum(g, g.parameter(p)));
  }
  for (double v : p.grad.data()) EXPECT_EQ(v, 1.0);
  Parameter<double> q("q", Tensor<double>::scalar(3.0));
  {
    Graph<double> g;
    Var x = g.parameter(q);
    g.backward(sum(g, mul(g, x, x)));
  }
  EXPECT_EQ(q.grad.item(), 6.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  Parameter<double> p("p", Tensor<double>::matrix(1, 3, {1, 2, 3}));
  Graph<double> g;
  EXPECT_THROW(g.backward(g.parameter(p)), ContractError);
}

TEST(Backward, AccumulationIsLinear) {
  CounterRng rng(8);
  Parameter<double> w("w", random_matrix(3, 3, rng));
  const auto x = random_matrix(2, 3, rng);
  auto l1 = [&](Graph<double>& g) { return sum(g, silu(g, matmul(g, g.constant(x), g.parameter(w)))); };
  auto l2 = [&](Graph<double>& g) {
    Var h = matmul(g, g.constant(x), g.parameter(w));
    return sum(g, mul(g, h, h));
  };
  w.zero_grad();
  {
    Graph<double> g;
    g.backward(add(g, l1(g), l2(g)));
  }
  const Tensor<double> joint = w.grad;
  w.zero_grad();
  {
    Graph<double> g;
    g.backward(l1(g));
  }
  {
    Graph<double> g;
    g.backward(l2(g));
  }
  for (std::size_t i = 0; i < joint.size(); ++i) EXPECT_NEAR(joint[i], w.grad[i], 1e-12);
}

TEST(Backward, GradRowMaskZeroesOtherRows) {
  Parameter<double> p("p", Tensor<double>::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  p.grad_row_mask = {0, 1, 0};
  Graph<double> g;
  Var x = g.parameter(p);
  Var loss = sum(g, mul(g, x, x));
  const double before = g.value(loss).item();
  g.backward(loss);
  EXPECT_EQ(before, 91.0);
  EXPECT_EQ(p.grad(0, 0), 0.0);
  EXPECT_EQ(p.grad(1, 0), 6.0);
  EXPECT_EQ(p.grad(1, 1), 8.0);
  EXPECT_EQ(p.grad(2, 1), 0.0);
}

TEST(Ops, DeterministicRepeatedCalls) {
  CounterRng rng(6);
  auto a = random_matrix(8, 16, rng).cast<float>();
  auto b = random_matrix(16, 8, rng).cast<float>();
  Graph<float> g1(false), g2(false);
  auto y1 = g1.value(softmax_rows(g1, matmul(g1, g1.constant(a), g1.constant(b))));
  auto y2 = g2.value(softmax_rows(g2, matmul(g2, g2.constant(a), g2.constant(b))));
  EXPECT_EQ(y1, y2);
}

TEST(Attention, CausalAndKeyMask) {
  // One sequence, one head: perturbing a later key/value leaves earlier rows unchanged.
  CounterRng rng(10);
  auto q = random_matrix(4, 2, rng), k = random_matrix(4, 2, rng), v = random_matrix(4, 2, rng);
  std::vector<std::uint8_t> mask{1, 1, 1, 1};
  Graph<double> g(false);
  const auto base = g.value(causal_attention(g, g.constant(q), g.constant(k), g.constant(v), {1, 4, 1}, mask));
  k(3, 0) += 5.0;
  v(3, 1) -= 2.0;
  Graph<double> g2(false);
  const auto moved = g2.value(causal_attention(g2, g2.constant(q), g2.constant(k), g2.constant(v), {1, 4, 1}, mask));
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(base(r, c), moved(r, c));
  }
  EXPECT_NE(base(3, 1), moved(3, 1));
  // First row attends only to itself.
  EXPECT_NEAR(base(0, 0), v(0, 0), 1e-15);
}

}  // namespace
}  // namespace smf
