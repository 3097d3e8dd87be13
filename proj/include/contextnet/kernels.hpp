/* Copyright 2026 The ContextNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Forward kernels on plain tensors. The autodiff tape wraps these for
// training; the inference path calls them directly. All kernels are pure
// functions of their inputs and are safe to run concurrently on disjoint
// outputs.

#ifndef CONTEXTNET_KERNELS_HPP_
#define CONTEXTNET_KERNELS_HPP_

#include <cstdint>

#include "contextnet/tensor.hpp"

namespace contextnet {
namespace kernels {

// Output length under same-ceil padding: T' = ceil(T / stride).
inline std::int64_t conv_out_len(std::int64_t t, std::int64_t stride) {
  return (t + stride - 1) / stride;
}

// Per-channel temporal convolution, zero padded so that T' = ceil(T/stride)
// with left pad floor((k-1)/2). Kernel layout is [k x D].
template <typename S>
Tensor<S> conv1d_depthwise(const Tensor<S>& x, const Tensor<S>& kernel,
                           std::int64_t stride) {
  if (stride < 1) throw ConfigError("conv1d_depthwise: stride must be >= 1");
  if (x.rank() != 2 || kernel.rank() != 2) {
    throw ConfigError("conv1d_depthwise: expected 2D input and kernel");
  }
  const std::int64_t t_in = x.dim(0), d = x.dim(1), k = kernel.dim(0);
  if (kernel.dim(1) != d) {
    throw ConfigError("conv1d_depthwise: channel mismatch, input " +
                      shape_str(x.shape()) + " vs kernel " + shape_str(kernel.shape()));
  }
  if (k % 2 == 0) throw ConfigError("conv1d_depthwise: kernel size must be odd");
  const std::int64_t left = (k - 1) / 2;
  const std::int64_t t_out = conv_out_len(t_in, stride);
  Tensor<S> out({t_out, d});
  for (std::int64_t to = 0; to < t_out; ++to) {
    const std::int64_t base = to * stride - left;
    const std::int64_t j0 = base < 0 ? -base : 0;
    const std::int64_t j1 = std::min<std::int64_t>(k, t_in - base);
    for (std::int64_t j = j0; j < j1; ++j) {
      const S* xr = x.data() + (base + j) * d;
      const S* kr = kernel.data() + j * d;
      S* orow = out.data() + to * d;
      for (std::int64_t c = 0; c < d; ++c) orow[c] += kr[c] * xr[c];
    }
  }
  return out;
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ConfigError("matmul: incompatible shapes " + shape_str(a.shape()) +
                      " x " + shape_str(b.shape()));
  }
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<S> out({m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    const S* arow = a.data() + i * k;
    S* orow = out.data() + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const S av = arow[p];
      if (av == S(0)) continue;
      const S* brow = b.data() + p * n;
      for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

// y[t, :] = x[t, :] + b
template <typename S>
Tensor<S> row_bias_add(const Tensor<S>& x, const Tensor<S>& b) {
  if (x.rank() != 2 || b.numel() != x.dim(1)) {
    throw ConfigError("row_bias_add: bias " + shape_str(b.shape()) +
                      " does not match " + shape_str(x.shape()));
  }
  Tensor<S> out = x;
  const std::int64_t t = x.dim(0), d = x.dim(1);
  for (std::int64_t i = 0; i < t; ++i) {
    S* row = out.data() + i * d;
    for (std::int64_t c = 0; c < d; ++c) row[c] += b[c];
  }
  return out;
}

// y[t, :] = x[t, :] * g  (per-channel gate broadcast over frames)
template <typename S>
Tensor<S> row_gate_mul(const Tensor<S>& x, const Tensor<S>& g) {
  if (x.rank() != 2 || g.numel() != x.dim(1)) {
    throw ConfigError("row_gate_mul: gate " + shape_str(g.shape()) +
                      " does not match " + shape_str(x.shape()));
  }
  Tensor<S> out = x;
  const std::int64_t t = x.dim(0), d = x.dim(1);
  for (std::int64_t i = 0; i < t; ++i) {
    S* row = out.data() + i * d;
    for (std::int64_t c = 0; c < d; ++c) row[c] *= g[c];
  }
  return out;
}

template <typename S>
Tensor<S> swish(const Tensor<S>& x) {
  Tensor<S> out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = swish_scalar(out[i]);
  return out;
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  Tensor<S> out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(out[i]);
  return out;
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& x) {
  Tensor<S> out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > S(0) ? out[i] : S(0);
  return out;
}

// Mean over the time axis; [T x D] -> [1 x D]. Summation runs in ascending
// frame order; sliding_mean must keep the same order so that a window
// covering the whole sequence reproduces this bitwise.
template <typename S>
Tensor<S> mean_rows(const Tensor<S>& x) {
  const std::int64_t t = x.dim(0), d = x.dim(1);
  if (t < 1) throw ConfigError("mean_rows: empty input");
  Tensor<S> out({1, d});
  for (std::int64_t i = 0; i < t; ++i) {
    const S* row = x.data() + i * d;
    for (std::int64_t c = 0; c < d; ++c) out[c] += row[c];
  }
  for (std::int64_t c = 0; c < d; ++c) out[c] /= static_cast<S>(t);
  return out;
}

// Centered stride-one pooling window of `window` frames, clipped at the
// sequence edges (mean over fewer frames there). For odd windows the span
// is symmetric; for even windows it extends one frame further right.
template <typename S>
Tensor<S> sliding_mean(const Tensor<S>& x, std::int64_t window) {
  if (window < 1) throw ConfigError("sliding_mean: window must be >= 1");
  const std::int64_t t = x.dim(0), d = x.dim(1);
  const std::int64_t hl = (window - 1) / 2, hr = window / 2;
  Tensor<S> out({t, d});
  for (std::int64_t i = 0; i < t; ++i) {
    const std::int64_t lo = std::max<std::int64_t>(0, i - hl);
    const std::int64_t hi = std::min<std::int64_t>(t - 1, i + hr);
    S* orow = out.data() + i * d;
    for (std::int64_t j = lo; j <= hi; ++j) {
      const S* row = x.data() + j * d;
      for (std::int64_t c = 0; c < d; ++c) orow[c] += row[c];
    }
    // Divide (not multiply by a reciprocal) so a window spanning the whole
    // sequence reproduces mean_rows bitwise.
    const S count = static_cast<S>(hi - lo + 1);
    for (std::int64_t c = 0; c < d; ++c) orow[c] /= count;
  }
  return out;
}

// Keep every stride-th row starting at row 0; the residual projection uses
// this so its frames align with the strided depthwise output.
template <typename S>
Tensor<S> subsample_rows(const Tensor<S>& x, std::int64_t stride) {
  if (stride < 1) throw ConfigError("subsample_rows: stride must be >= 1");
  const std::int64_t t = x.dim(0), d = x.dim(1);
  const std::int64_t t_out = conv_out_len(t, stride);
  Tensor<S> out({t_out, d});
  for (std::int64_t i = 0; i < t_out; ++i) {
    const S* row = x.data() + i * stride * d;
    std::copy(row, row + d, out.data() + i * d);
  }
  return out;
}

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased (divide by frame count)
};

// Batch statistics over the time axis of one or more tensors sharing a
// channel dimension. Accumulation is in double regardless of S.
template <typename S>
BatchStats batch_stats(const std::vector<const Tensor<S>*>& xs) {
  const std::int64_t d = xs.front()->dim(1);
  std::int64_t n = 0;
  BatchStats st;
  st.mean.assign(static_cast<std::size_t>(d), 0.0);
  st.var.assign(static_cast<std::size_t>(d), 0.0);
  for (const auto* x : xs) {
    const std::int64_t t = x->dim(0);
    n += t;
    for (std::int64_t i = 0; i < t; ++i) {
      const S* row = x->data() + i * d;
      for (std::int64_t c = 0; c < d; ++c) st.mean[static_cast<std::size_t>(c)] += row[c];
    }
  }
  if (n < 1) throw ConfigError("batch_stats: no frames");
  for (auto& m : st.mean) m /= static_cast<double>(n);
  for (const auto* x : xs) {
    const std::int64_t t = x->dim(0);
    for (std::int64_t i = 0; i < t; ++i) {
      const S* row = x->data() + i * d;
      for (std::int64_t c = 0; c < d; ++c) {
        const double dv = static_cast<double>(row[c]) - st.mean[static_cast<std::size_t>(c)];
        st.var[static_cast<std::size_t>(c)] += dv * dv;
      }
    }
  }
  for (auto& v : st.var) v /= static_cast<double>(n);
  return st;
}

template <typename S>
Tensor<S> batch_norm_apply(const Tensor<S>& x, const std::vector<double>& mean,
                           const std::vector<double>& var, const Tensor<S>& gamma,
                           const Tensor<S>& beta, S eps) {
  const std::int64_t t = x.dim(0), d = x.dim(1);
  Tensor<S> out({t, d});
  std::vector<S> scale(static_cast<std::size_t>(d)), shift(static_cast<std::size_t>(d));
  for (std::int64_t c = 0; c < d; ++c) {
    const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + static_cast<double>(eps));
    scale[static_cast<std::size_t>(c)] = static_cast<S>(static_cast<double>(gamma[c]) * inv);
    shift[static_cast<std::size_t>(c)] =
        static_cast<S>(static_cast<double>(beta[c]) -
                       mean[static_cast<std::size_t>(c)] * static_cast<double>(gamma[c]) * inv);
  }
  for (std::int64_t i = 0; i < t; ++i) {
    const S* row = x.data() + i * d;
    S* orow = out.data() + i * d;
    for (std::int64_t c = 0; c < d; ++c) orow[c] = scale[static_cast<std::size_t>(c)] * row[c] + shift[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace kernels
}  // namespace contextnet

#endif  // CONTEXTNET_KERNELS_HPP_
