// Copyright 2026 The c2v Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense linear algebra, activations, Adam and the finite-difference oracle.
// Everything here is a pure function of its arguments and runs in 64-bit
// reals.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

#include "c2v/error.hpp"

namespace c2v {

using DenseVector = std::vector<double>;
using Rng = std::mt19937_64;

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix gaussian(std::size_t r, std::size_t c, double stddev,
                              Rng& rng) {
    DenseMatrix m(r, c);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : m.values) v = dist(rng);
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }

  std::span<double> row(std::size_t r) {
    return {values.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  bool operator==(const DenseMatrix&) const = default;
};

// ---------------------------------------------------------------------------
// Scalar functions

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Deterministic 64-bit mixing (splitmix64 finalizer), used to derive
// independent RNG streams from (seed, epoch, key) tuples.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class... Ts>
std::uint64_t derive_seed(std::uint64_t seed, Ts... keys) {
  std::uint64_t h = mix64(seed);
  ((h = mix64(h ^ static_cast<std::uint64_t>(keys))), ...);
  return h;
}

// ---------------------------------------------------------------------------
// Vector / matrix kernels

inline double inner_product(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    fail<DimensionError>("inner_product: dimension mismatch (", u.size(),
                         " vs ", v.size(), ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

inline double squared_norm(std::span<const double> u) { return inner_product(u, u); }

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Pre-activations Wx + b.
inline DenseVector affine(const DenseMatrix& w, std::span<const double> b,
                          std::span<const double> x) {
  check_dims(x.size(), w.cols, "affine (W.cols vs x.dim)");
  check_dims(b.size(), w.rows, "affine (W.rows vs b.dim)");
  DenseVector out(w.rows);
  for (std::size_t r = 0; r < w.rows; ++r) out[r] = inner_product(w.row(r), x) + b[r];
  return out;
}

inline DenseVector relu_layer_forward(const DenseMatrix& w, std::span<const double> b,
                                      std::span<const double> x) {
  DenseVector out = affine(w, b, x);
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return out;
}

struct ReluLayerGrads {
  DenseMatrix weights;
  DenseVector bias;
  DenseVector input;
};

// Adds the contraction of d(relu(Wx+b))/d(W,b,x) with `upstream` into the
// given accumulators. `pre` are the forward pre-activations; the subgradient
// at exactly zero is zero. `grad_x` may be empty when the input gradient is
// not needed.
inline void relu_layer_backward_accumulate(const DenseMatrix& w,
                                           std::span<const double> x,
                                           std::span<const double> pre,
                                           std::span<const double> upstream,
                                           DenseMatrix& grad_w,
                                           std::span<double> grad_b,
                                           std::span<double> grad_x) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    if (!(pre[r] > 0.0)) continue;
    const double g = upstream[r];
    if (g == 0.0) continue;
    grad_b[r] += g;
    auto gw = grad_w.row(r);
    for (std::size_t c = 0; c < w.cols; ++c) gw[c] += g * x[c];
    if (!grad_x.empty()) {
      auto wr = w.row(r);
      for (std::size_t c = 0; c < w.cols; ++c) grad_x[c] += g * wr[c];
    }
  }
}

inline ReluLayerGrads relu_layer_backward(const DenseMatrix& w, std::span<const double> b,
                                          std::span<const double> x,
                                          std::span<const double> upstream) {
  const DenseVector pre = affine(w, b, x);
  check_dims(upstream.size(), w.rows, "relu_layer_backward (upstream)");
  ReluLayerGrads g{DenseMatrix(w.rows, w.cols), DenseVector(w.rows, 0.0),
                   DenseVector(w.cols, 0.0)};
  relu_layer_backward_accumulate(w, x, pre, upstream, g.weights, g.bias, g.input);
  return g;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  static AdamState for_size(std::size_t n, double learning_rate) {
    AdamState s;
    s.first_moment.assign(n, 0.0);
    s.second_moment.assign(n, 0.0);
    s.learning_rate = learning_rate;
    return s;
  }
};

inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& state) {
  check_dims(grads.size(), params.size(), "adam_step (grads)");
  check_dims(state.first_moment.size(), params.size(), "adam_step (first moment)");
  check_dims(state.second_moment.size(), params.size(), "adam_step (second moment)");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Finite differences

inline constexpr double kFiniteDiffEps = 1e-5;

inline std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double eps = kFiniteDiffEps) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = f(probe);
    probe[i] = saved - eps;
    const double down = f(probe);
    probe[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

// ||a - n|| / max(||a||, ||n||), or 0 when both vanish.
inline double gradient_relative_error(std::span<const double> analytic,
                                      std::span<const double> numeric) {
  check_dims(numeric.size(), analytic.size(), "gradient_relative_error");
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  if (scale < 1e-12) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

// ---------------------------------------------------------------------------
// Named parameter blocks. Every trainable struct exposes
//   template <class Self> static auto params(Self& self);
// returning a vector of ParamView over its members. Adam, gradient
// accumulators and the model file format are all written against this.

template <class T>
struct ParamView {
  std::string_view name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<T> values;
};

inline ParamView<double> view(std::string_view name, DenseMatrix& m) {
  return {name, m.rows, m.cols, m.values};
}
inline ParamView<const double> view(std::string_view name, const DenseMatrix& m) {
  return {name, m.rows, m.cols, m.values};
}
inline ParamView<double> view(std::string_view name, DenseVector& v) {
  return {name, v.size(), 1, v};
}
inline ParamView<const double> view(std::string_view name, const DenseVector& v) {
  return {name, v.size(), 1, v};
}
inline ParamView<double> view(std::string_view name, double& x) {
  return {name, 1, 1, std::span<double>(&x, 1)};
}
inline ParamView<const double> view(std::string_view name, const double& x) {
  return {name, 1, 1, std::span<const double>(&x, 1)};
}

template <class M>
std::size_t param_count(const M& model) {
  std::size_t n = 0;
  for (const auto& p : M::params(model)) n += p.values.size();
  return n;
}

template <class M>
std::vector<double> flatten(const M& model) {
  std::vector<double> out;
  out.reserve(param_count(model));
  for (const auto& p : M::params(model)) out.insert(out.end(), p.values.begin(), p.values.end());
  return out;
}

template <class M>
void unflatten(M& model, std::span<const double> flat) {
  check_dims(flat.size(), param_count(model), "unflatten");
  std::size_t off = 0;
  for (auto& p : M::params(model)) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), p.values.size(),
                p.values.begin());
    off += p.values.size();
  }
}

template <class M>
M zeros_like(const M& model) {
  M out = model;
  for (auto& p : M::params(out)) std::fill(p.values.begin(), p.values.end(), 0.0);
  return out;
}

template <class M>
bool params_finite(const M& model) {
  for (const auto& p : M::params(model)) {
    if (!all_finite(p.values)) return false;
  }
  return true;
}

}  // namespace c2v
