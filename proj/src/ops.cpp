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

#include "smf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace smf {
namespace kernels {

template <typename T>
void gemm_nn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill_n(out, m * n, T{0});
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = out + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  // Transpose b once so the inner loop is a contiguous axpy.
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(a, bt.data(), out, m, k, n, accumulate);
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill_n(out, k * n, T{0});
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T{0}) continue;
      T* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a.shape()) + " · " + shape_string(b.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(a.rows(), b.cols());
  gemm_nn(a.ptr(), b.ptr(), out.ptr(), a.rows(), a.cols(), b.cols(), false);
  return out;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace kernels

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + " shape mismatch: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot(const T* x, const T* y, std::size_t n) {
  T acc{0};
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  Tensor<T> out = kernels::matmul(av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  return g.record(std::move(out), {a, b}, [a, b, m, k, n](Graph<T>& g, const Tensor<T>& dout) {
    if (auto* da = g.grad_sink(a)) kernels::gemm_nt(dout.ptr(), g.value(b).ptr(), da->ptr(), m, n, k, true);
    if (auto* db = g.grad_sink(b)) kernels::gemm_tn(g.value(a).ptr(), dout.ptr(), db->ptr(), m, k, n, true);
  });
}

template <typename T>
Var matmul_nt(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_nt inner dimensions differ: " + shape_string(av.shape()) + " · " +
                     shape_string(bv.shape()) + "ᵀ");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor<T> out = Tensor<T>::zeros(m, n);
  kernels::gemm_nt(av.ptr(), bv.ptr(), out.ptr(), m, k, n, false);
  return g.record(std::move(out), {a, b}, [a, b, m, k, n](Graph<T>& g, const Tensor<T>& dout) {
    // da[m×k] = dout[m×n] · b[n×k];  db[n×k] = doutᵀ · a
    if (auto* da = g.grad_sink(a)) kernels::gemm_nn(dout.ptr(), g.value(b).ptr(), da->ptr(), m, n, k, true);
    if (auto* db = g.grad_sink(b)) kernels::gemm_tn(dout.ptr(), g.value(a).ptr(), db->ptr(), m, n, k, true);
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require_same_shape(av, bv, "add");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& dout) {
    for (Var v : {a, b}) {
      if (auto* d = g.grad_sink(v)) axpy(T{1}, dout.ptr(), d->ptr(), dout.size());
    }
  });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require_same_shape(av, bv, "mul");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& dout) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    if (auto* da = g.grad_sink(a)) {
      for (std::size_t i = 0; i < dout.size(); ++i) (*da)[i] += dout[i] * bv[i];
    }
    if (auto* db = g.grad_sink(b)) {
      for (std::size_t i = 0; i < dout.size(); ++i) (*db)[i] += dout[i] * av[i];
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, T factor) {
  Tensor<T> out = g.value(a);
  for (auto& x : out.data()) x *= factor;
  return g.record(std::move(out), {a}, [a, factor](Graph<T>& g, const Tensor<T>& dout) {
    if (auto* da = g.grad_sink(a)) axpy(factor, dout.ptr(), da->ptr(), dout.size());
  });
}

template <typename T>
Var sum(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  T acc{0};
  for (auto x : av.data()) acc += x;
  return g.record(Tensor<T>::scalar(acc), {a}, [a](Graph<T>& g, const Tensor<T>& dout) {
    if (auto* da = g.grad_sink(a)) {
      const T s = dout[0];
      for (auto& x : da->data()) x += s;
    }
  });
}

template <typename T>
Var silu(Graph<T>& g, Var x) {
  const auto& xv = g.value(x);
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * kernels::sigmoid(xv[i]);
  return g.record(std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& dout) {
    auto* dx = g.grad_sink(x);
    if (dx == nullptr) return;
    const auto& xv = g.value(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T s = kernels::sigmoid(xv[i]);
      (*dx)[i] += dout[i] * s * (T{1} + xv[i] * (T{1} - s));
    }
  });
}

template <typename T>
Var softmax_rows(Graph<T>& g, Var x) {
  const auto& xv = g.value(x);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor<T> out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.ptr() + r * cols;
    T* o = out.ptr() + r * cols;
    const T mx = *std::max_element(in, in + cols);
    T total{0};
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  Tensor<T> saved = g.recording() ? out : Tensor<T>{};
  return g.record(std::move(out), {x}, [x, rows, cols, y = std::move(saved)](Graph<T>& g, const Tensor<T>& dout) {
    auto* dx = g.grad_sink(x);
    if (dx == nullptr) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* go = dout.ptr() + r * cols;
      const T* yr = y.ptr() + r * cols;
      const T inner = dot(go, yr, cols);
      T* d = dx->ptr() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) d[c] += yr[c] * (go[c] - inner);
    }
  });
}

template <typename T>
Var layer_norm(Graph<T>& g, Var x, Var gain, Var bias, T eps) {
  const auto& xv = g.value(x);
  const auto& gv = g.value(gain);
  const auto& bv = g.value(bias);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (gv.size() != cols || bv.size() != cols) {
    throw ShapeError("layer_norm gain/bias " + shape_string(gv.shape()) + "/" + shape_string(bv.shape()) +
                     " do not match width of " + shape_string(xv.shape()));
  }
  Tensor<T> out(xv.shape());
  std::vector<T> xhat(rows * cols), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.ptr() + r * cols;
    T mean{0};
    for (std::size_t c = 0; c < cols; ++c) mean += in[c];
    mean /= static_cast<T>(cols);
    T var{0};
    for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= static_cast<T>(cols);
    const T is = T{1} / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const T h = (in[c] - mean) * is;
      xhat[r * cols + c] = h;
      out(r, c) = h * gv[c] + bv[c];
    }
  }
  return g.record(std::move(out), {x, gain, bias},
                  [x, gain, bias, rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Graph<T>& g, const Tensor<T>& dout) {
                    const auto& gv = g.value(gain);
                    if (auto* dg = g.grad_sink(gain)) {
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) (*dg)[c] += dout(r, c) * xhat[r * cols + c];
                    }
                    if (auto* db = g.grad_sink(bias)) {
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) (*db)[c] += dout(r, c);
                    }
                    auto* dx = g.grad_sink(x);
                    if (dx == nullptr) return;
                    std::vector<T> dh(cols);
                    for (std::size_t r = 0; r < rows; ++r) {
                      T mean_dh{0}, mean_dh_h{0};
                      for (std::size_t c = 0; c < cols; ++c) {
                        dh[c] = dout(r, c) * gv[c];
                        mean_dh += dh[c];
                        mean_dh_h += dh[c] * xhat[r * cols + c];
                      }
                      mean_dh /= static_cast<T>(cols);
                      mean_dh_h /= static_cast<T>(cols);
                      for (std::size_t c = 0; c < cols; ++c) {
                        (*dx)(r, c) += inv_std[r] * (dh[c] - mean_dh - xhat[r * cols + c] * mean_dh_h);
                      }
                    }
                  });
}

template <typename T>
Var gather_rows(Graph<T>& g, Var table, std::span<const std::uint32_t> ids) {
  const auto& tv = g.value(table);
  const std::size_t cols = tv.cols();
  Tensor<T> out = Tensor<T>::zeros(ids.size(), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw ShapeError("gather_rows index " + std::to_string(ids[i]) + " out of range for " +
                       shape_string(tv.shape()));
    }
    std::copy_n(tv.ptr() + ids[i] * cols, cols, out.ptr() + i * cols);
  }
  std::vector<std::uint32_t> idx(ids.begin(), ids.end());
  return g.record(std::move(out), {table}, [table, cols, idx = std::move(idx)](Graph<T>& g, const Tensor<T>& dout) {
    auto* dt = g.grad_sink(table);
    if (dt == nullptr) return;
    for (std::size_t i = 0; i < idx.size(); ++i) axpy(T{1}, dout.ptr() + i * cols, dt->ptr() + idx[i] * cols, cols);
  });
}

template <typename T>
Var causal_attention(Graph<T>& g, Var q, Var k, Var v, AttentionShape shape,
                     std::span<const std::uint8_t> key_mask) {
  const auto& qv = g.value(q);
  const auto& kv = g.value(k);
  const auto& vv = g.value(v);
  require_same_shape(qv, kv, "causal_attention");
  require_same_shape(qv, vv, "causal_attention");
  const std::size_t B = shape.batch, S = shape.seq, H = shape.heads;
  const std::size_t d = qv.cols();
  if (B * S != qv.rows() || H == 0 || d % H != 0 || key_mask.size() != B * S) {
    throw ShapeError("causal_attention layout does not match input " + shape_string(qv.shape()));
  }
  const std::size_t hd = d / H;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(hd));
  // probs[b][h][i][j] for j <= i
  std::vector<T> probs(B * H * S * S, T{0});
  Tensor<T> out(qv.shape());
  std::vector<T> row(S);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < S; ++i) {
        const T* qi = qv.ptr() + (b * S + i) * d + h * hd;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          if (!key_mask[b * S + j] && j != i) continue;
          row[j] = dot(qi, kv.ptr() + (b * S + j) * d + h * hd, hd) * inv_sqrt;
          mx = std::max(mx, row[j]);
        }
        T total{0};
        T* p = probs.data() + ((b * H + h) * S + i) * S;
        for (std::size_t j = 0; j <= i; ++j) {
          if (!key_mask[b * S + j] && j != i) continue;
          p[j] = std::exp(row[j] - mx);
          total += p[j];
        }
        T* o = out.ptr() + (b * S + i) * d + h * hd;
        for (std::size_t j = 0; j <= i; ++j) {
          p[j] /= total;
          if (p[j] != T{0}) axpy(p[j], vv.ptr() + (b * S + j) * d + h * hd, o, hd);
        }
      }
    }
  }
  return g.record(std::move(out), {q, k, v},
                  [q, k, v, B, S, H, d, hd, inv_sqrt, probs = std::move(probs)](Graph<T>& g, const Tensor<T>& dout) {
                    const auto& qv = g.value(q);
                    const auto& kv = g.value(k);
                    const auto& vv = g.value(v);
                    auto* dq = g.grad_sink(q);
                    auto* dk = g.grad_sink(k);
                    auto* dv = g.grad_sink(v);
                    std::vector<T> dp(S);
                    for (std::size_t b = 0; b < B; ++b) {
                      for (std::size_t h = 0; h < H; ++h) {
                        for (std::size_t i = 0; i < S; ++i) {
                          const T* p = probs.data() + ((b * H + h) * S + i) * S;
                          const T* go = dout.ptr() + (b * S + i) * d + h * hd;
                          T inner{0};
                          for (std::size_t j = 0; j <= i; ++j) {
                            if (p[j] == T{0}) {
                              dp[j] = T{0};
                              continue;
                            }
                            const T* vj = vv.ptr() + (b * S + j) * d + h * hd;
                            dp[j] = dot(go, vj, hd);
                            inner += p[j] * dp[j];
                            if (dv) axpy(p[j], go, dv->ptr() + (b * S + j) * d + h * hd, hd);
                          }
                          const T* qi = qv.ptr() + (b * S + i) * d + h * hd;
                          for (std::size_t j = 0; j <= i; ++j) {
                            if (p[j] == T{0}) continue;
                            const T ds = p[j] * (dp[j] - inner) * inv_sqrt;
                            if (dq) axpy(ds, kv.ptr() + (b * S + j) * d + h * hd, dq->ptr() + (b * S + i) * d + h * hd, hd);
                            if (dk) axpy(ds, qi, dk->ptr() + (b * S + j) * d + h * hd, hd);
                          }
                        }
                      }
                    }
                  });
}

template <typename T>
Var cross_entropy_masked(Graph<T>& g, Var logits, std::span<const std::uint32_t> targets,
                         std::span<const std::uint8_t> mask) {
  const auto& lv = g.value(logits);
  const std::size_t rows = lv.rows(), V = lv.cols();
  if (targets.size() != rows || mask.size() != rows) {
    throw ShapeError("cross_entropy_masked: " + std::to_string(targets.size()) + " targets / " +
                     std::to_string(mask.size()) + " mask entries for logits " + shape_string(lv.shape()));
  }
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    if (targets[r] >= V) {
      throw ShapeError("cross_entropy_masked target " + std::to_string(targets[r]) + " outside vocabulary of " +
                       std::to_string(V));
    }
    ++count;
  }
  if (count == 0) throw EmptyLossError("cross_entropy_masked: every position is masked out");

  std::vector<T> lse(rows, T{0});
  T total{0};
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    const T* in = lv.ptr() + r * V;
    const T mx = *std::max_element(in, in + V);
    T s{0};
    for (std::size_t c = 0; c < V; ++c) s += std::exp(in[c] - mx);
    lse[r] = mx + std::log(s);
    total += lse[r] - in[targets[r]];
  }
  const T inv_count = T{1} / static_cast<T>(count);
  std::vector<std::uint32_t> tgt(targets.begin(), targets.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  return g.record(Tensor<T>::scalar(total * inv_count), {logits},
                  [logits, rows, V, inv_count, lse = std::move(lse), tgt = std::move(tgt), msk = std::move(msk)](
                      Graph<T>& g, const Tensor<T>& dout) {
                    auto* dl = g.grad_sink(logits);
                    if (dl == nullptr) return;
                    const auto& lv = g.value(logits);
                    const T s = dout[0] * inv_count;
                    for (std::size_t r = 0; r < rows; ++r) {
                      if (!msk[r]) continue;
                      const T* in = lv.ptr() + r * V;
                      T* d = dl->ptr() + r * V;
                      for (std::size_t c = 0; c < V; ++c) d[c] += s * std::exp(in[c] - lse[r]);
                      d[tgt[r]] -= s;
                    }
                  });
}

template <typename T>
Var selected_key_scores(Graph<T>& g, Var query, Var keys1, Var keys2,
                        std::span<const std::uint32_t> flat_indices, std::size_t k) {
  const auto& qv = g.value(query);
  const auto& k1 = g.value(keys1);
  const auto& k2 = g.value(keys2);
  const std::size_t rows = qv.rows(), d = qv.cols(), half = d / 2, side = k1.rows();
  if (d % 2 != 0 || k1.cols() != half || !k1.same_shape(k2) || flat_indices.size() != rows * k) {
    throw ShapeError("selected_key_scores: query " + shape_string(qv.shape()) + " keys " + shape_string(k1.shape()) +
                     "/" + shape_string(k2.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(rows, k);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* qr = qv.ptr() + r * d;
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint32_t flat = flat_indices[r * k + j];
      if (flat >= side * side) throw ShapeError("selected_key_scores: flat index out of range");
      const std::size_t i1 = flat / side, i2 = flat % side;
      out(r, j) = dot(k1.ptr() + i1 * half, qr, half) + dot(k2.ptr() + i2 * half, qr + half, half);
    }
  }
  std::vector<std::uint32_t> idx(flat_indices.begin(), flat_indices.end());
  return g.record(std::move(out), {query, keys1, keys2},
                  [query, keys1, keys2, rows, d, half, side, k, idx = std::move(idx)](Graph<T>& g,
                                                                                     const Tensor<T>& dout) {
                    const auto& qv = g.value(query);
                    const auto& k1 = g.value(keys1);
                    const auto& k2 = g.value(keys2);
                    auto* dq = g.grad_sink(query);
                    auto* dk1 = g.grad_sink(keys1);
                    auto* dk2 = g.grad_sink(keys2);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const T* qr = qv.ptr() + r * d;
                      for (std::size_t j = 0; j < k; ++j) {
                        const T go = dout(r, j);
                        if (go == T{0}) continue;
                        const std::size_t i1 = idx[r * k + j] / side, i2 = idx[r * k + j] % side;
                        if (dq) {
                          axpy(go, k1.ptr() + i1 * half, dq->ptr() + r * d, half);
                          axpy(go, k2.ptr() + i2 * half, dq->ptr() + r * d + half, half);
                        }
                        if (dk1) axpy(go, qr, dk1->ptr() + i1 * half, half);
                        if (dk2) axpy(go, qr + half, dk2->ptr() + i2 * half, half);
                      }
                    }
                  });
}

template <typename T>
Var weighted_row_sum(Graph<T>& g, Var table, std::span<const std::uint32_t> indices, Var weights) {
  const auto& tv = g.value(table);
  const auto& wv = g.value(weights);
  const std::size_t rows = wv.rows(), k = wv.cols(), dv = tv.cols();
  if (indices.size() != rows * k) {
    throw ShapeError("weighted_row_sum: " + std::to_string(indices.size()) + " indices for weights " +
                     shape_string(wv.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(rows, dv);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint32_t i = indices[r * k + j];
      if (i >= tv.rows()) throw ShapeError("weighted_row_sum: index out of range");
      axpy(wv(r, j), tv.ptr() + i * dv, out.ptr() + r * dv, dv);
    }
  }
  std::vector<std::uint32_t> idx(indices.begin(), indices.end());
  return g.record(std::move(out), {table, weights},
                  [table, weights, rows, k, dv, idx = std::move(idx)](Graph<T>& g, const Tensor<T>& dout) {
                    const auto& tv = g.value(table);
                    const auto& wv = g.value(weights);
                    auto* dt = g.grad_sink(table);
                    auto* dw = g.grad_sink(weights);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const T* go = dout.ptr() + r * dv;
                      for (std::size_t j = 0; j < k; ++j) {
                        const std::uint32_t i = idx[r * k + j];
                        if (dw) (*dw)(r, j) += dot(go, tv.ptr() + i * dv, dv);
                        if (dt) axpy(wv(r, j), go, dt->ptr() + i * dv, dv);
                      }
                    }
                  });
}

#define SMF_INSTANTIATE_OPS(T)                                                                                  \
  template void kernels::gemm_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);       \
  template void kernels::gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);       \
  template void kernels::gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);       \
  template Tensor<T> kernels::matmul<T>(const Tensor<T>&, const Tensor<T>&);                                     \
  template T kernels::sigmoid<T>(T);                                                                             \
  template Var matmul<T>(Graph<T>&, Var, Var);                                                                   \
  template Var matmul_nt<T>(Graph<T>&, Var, Var);                                                                \
  template Var add<T>(Graph<T>&, Var, Var);                                                                      \
  template Var mul<T>(Graph<T>&, Var, Var);                                                                      \
  template Var scale<T>(Graph<T>&, Var, T);                                                                      \
  template Var sum<T>(Graph<T>&, Var);                                                                           \
  template Var silu<T>(Graph<T>&, Var);                                                                          \
  template Var softmax_rows<T>(Graph<T>&, Var);                                                                  \
  template Var layer_norm<T>(Graph<T>&, Var, Var, Var, T);                                                       \
  template Var gather_rows<T>(Graph<T>&, Var, std::span<const std::uint32_t>);                                   \
  template Var causal_attention<T>(Graph<T>&, Var, Var, Var, AttentionShape, std::span<const std::uint8_t>);     \
  template Var cross_entropy_masked<T>(Graph<T>&, Var, std::span<const std::uint32_t>,                           \
                                       std::span<const std::uint8_t>);                                           \
  template Var selected_key_scores<T>(Graph<T>&, Var, Var, Var, std::span<const std::uint32_t>, std::size_t);    \
  template Var weighted_row_sum<T>(Graph<T>&, Var, std::span<const std::uint32_t>, Var);

SMF_INSTANTIATE_OPS(float)
SMF_INSTANTIATE_OPS(double)

}  // namespace smf
