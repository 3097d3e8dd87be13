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

// The ContextNet audio encoder: a stack of depthwise-separable convolution
// blocks, each block batch-normalized, swish-activated, gated by a
// squeeze-and-excitation module and joined by a projected skip connection.
// A block C(x) = Act(SE(f^m(x)) + P(x)) with f(x) = Act(BN(Conv(x))); a
// stride-2 block strides only its final conv layer and its projection.

#ifndef CONTEXTNET_ENCODER_HPP_
#define CONTEXTNET_ENCODER_HPP_

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "contextnet/encoder_config.hpp"
#include "contextnet/params.hpp"

namespace contextnet {

// Global squeeze-and-excitation when window == 0; otherwise the pooling is
// a centered stride-one window of that many frames, clipped at the edges.
constexpr std::int64_t kSeGlobalWindow = 0;

template <typename S>
struct SeParams {
  Parameter<S>* w1 = nullptr;  // [D x Db]
  Parameter<S>* b1 = nullptr;  // [Db]
  Parameter<S>* w2 = nullptr;  // [Db x D]
  Parameter<S>* b2 = nullptr;  // [D]
  std::int64_t window = kSeGlobalWindow;
};

inline std::int64_t se_bottleneck_dim(std::int64_t channels) {
  const std::int64_t db = channels / 8;
  return db < 1 ? 1 : db;
}

template <typename S>
struct BnLayer {
  Parameter<S>* gamma = nullptr;
  Parameter<S>* beta = nullptr;
  Parameter<S>* running_mean = nullptr;  // buffers (non-trainable)
  Parameter<S>* running_var = nullptr;
  S eps = static_cast<S>(1e-3);
  S momentum = static_cast<S>(0.99);
};

template <typename S>
struct ConvLayer {
  Parameter<S>* dw_kernel = nullptr;  // [k x Din]
  Parameter<S>* dw_bias = nullptr;    // [Din]
  Parameter<S>* pw_weight = nullptr;  // [Din x Dout]
  Parameter<S>* pw_bias = nullptr;    // [Dout]
  BnLayer<S> bn;
  int stride = 1;
};

template <typename S>
struct ProjLayer {
  Parameter<S>* weight = nullptr;  // [Din x Dout]
  Parameter<S>* bias = nullptr;    // [Dout]
  BnLayer<S> bn;
  int stride = 1;
};

template <typename S>
struct BlockParams {
  BlockSpec spec;
  int in_channels = 0;
  std::vector<ConvLayer<S>> layers;
  std::optional<SeParams<S>> se;
  std::optional<ProjLayer<S>> proj;
};

template <typename S>
struct EncoderParams {
  EncoderConfig config;
  std::vector<BlockParams<S>> blocks;

  int output_dim() const { return blocks.back().spec.out_channels; }
};

// ----- construction -----

template <typename S, typename Rng>
BnLayer<S> make_bn(ParamStore<S>& store, const std::string& prefix, std::int64_t d, Rng&) {
  BnLayer<S> bn;
  bn.gamma = &store.create(prefix + ".gamma", Tensor<S>::full({d}, S(1)));
  bn.beta = &store.create(prefix + ".beta", Tensor<S>({d}));
  bn.running_mean = &store.create(prefix + ".running_mean", Tensor<S>({d}), /*trainable=*/false);
  bn.running_var = &store.create(prefix + ".running_var", Tensor<S>::full({d}, S(1)), /*trainable=*/false);
  return bn;
}

template <typename S, typename Rng>
SeParams<S> make_se(ParamStore<S>& store, const std::string& prefix, std::int64_t d,
                    std::int64_t window, Rng& rng) {
  const std::int64_t db = se_bottleneck_dim(d);
  SeParams<S> se;
  se.w1 = &store.create(prefix + ".w1", random_normal<S>({d, db}, S(1) / std::sqrt(S(d)), rng));
  se.b1 = &store.create(prefix + ".b1", Tensor<S>({db}));
  se.w2 = &store.create(prefix + ".w2", random_normal<S>({db, d}, S(1) / std::sqrt(S(db)), rng));
  se.b2 = &store.create(prefix + ".b2", Tensor<S>({d}));
  se.window = window;
  return se;
}

template <typename S, typename Rng>
EncoderParams<S> build_encoder_params(ParamStore<S>& store, const EncoderConfig& config,
                                      Rng& rng, std::int64_t se_window = kSeGlobalWindow,
                                      const std::string& prefix = "encoder") {
  config.validate();
  EncoderParams<S> enc;
  enc.config = config;
  int in_ch = config.input_dim;
  for (std::size_t bi = 0; bi < config.blocks.size(); ++bi) {
    const BlockSpec& spec = config.blocks[bi];
    const std::string bp = prefix + ".b" + std::to_string(bi);
    BlockParams<S> block;
    block.spec = spec;
    block.in_channels = in_ch;
    int din = in_ch;
    for (int li = 0; li < spec.num_layers; ++li) {
      const std::string lp = bp + ".l" + std::to_string(li);
      ConvLayer<S> layer;
      layer.stride = (li == spec.num_layers - 1) ? spec.stride : 1;
      layer.dw_kernel = &store.create(
          lp + ".dw_kernel",
          random_normal<S>({spec.kernel_size, din}, S(1) / std::sqrt(S(spec.kernel_size)), rng));
      layer.dw_bias = &store.create(lp + ".dw_bias", Tensor<S>({din}));
      layer.pw_weight = &store.create(
          lp + ".pw_weight", random_normal<S>({din, spec.out_channels}, S(1) / std::sqrt(S(din)), rng));
      layer.pw_bias = &store.create(lp + ".pw_bias", Tensor<S>({spec.out_channels}));
      layer.bn = make_bn(store, lp + ".bn", spec.out_channels, rng);
      block.layers.push_back(layer);
      din = spec.out_channels;
    }
    if (spec.se) block.se = make_se(store, bp + ".se", spec.out_channels, se_window, rng);
    if (spec.residual) {
      ProjLayer<S> proj;
      proj.stride = spec.stride;
      proj.weight = &store.create(
          bp + ".proj.weight",
          random_normal<S>({in_ch, spec.out_channels}, S(1) / std::sqrt(S(in_ch)), rng));
      proj.bias = &store.create(bp + ".proj.bias", Tensor<S>({spec.out_channels}));
      proj.bn = make_bn(store, bp + ".proj.bn", spec.out_channels, rng);
      block.proj = proj;
    }
    enc.blocks.push_back(std::move(block));
    in_ch = spec.out_channels;
  }
  return enc;
}

// ----- forward -----

template <typename S>
Value se_module(Tape<S>& tape, Value x, const SeParams<S>& p) {
  const std::int64_t d = tape.val(x).dim(1);
  if (p.w1->value.dim(0) != d) {
    throw ConfigError("se_module: input has " + std::to_string(d) + " channels, params expect " +
                      std::to_string(p.w1->value.dim(0)));
  }
  if (tape.val(x).dim(0) < 1) throw ConfigError("se_module: empty input");
  const bool global = p.window == kSeGlobalWindow;
  Value pooled = global ? tape.mean_rows(x) : tape.sliding_mean(x, p.window);
  Value z1 = tape.row_bias_add(tape.matmul(pooled, tape.use(*p.w1)), tape.use(*p.b1));
  Value a1 = tape.swish(z1);
  Value z2 = tape.row_bias_add(tape.matmul(a1, tape.use(*p.w2)), tape.use(*p.b2));
  Value theta = tape.sigmoid(z2);
  return global ? tape.row_gate_mul(x, theta) : tape.mul(x, theta);
}

namespace detail {

// One conv layer applied to the whole batch: depthwise + bias, pointwise +
// bias per utterance, then one batch norm across all frames of the batch,
// then the activation.
template <typename S>
std::vector<Value> conv_layer_batch(Tape<S>& tape, const std::vector<Value>& xs,
                                    const ConvLayer<S>& layer, bool train) {
  std::vector<Value> pre;
  pre.reserve(xs.size());
  Value kernel = tape.use(*layer.dw_kernel);
  Value dwb = tape.use(*layer.dw_bias);
  Value pww = tape.use(*layer.pw_weight);
  Value pwb = tape.use(*layer.pw_bias);
  for (Value x : xs) {
    Value h = tape.conv1d_depthwise(x, kernel, layer.stride);
    h = tape.row_bias_add(h, dwb);
    h = tape.matmul(h, pww);
    h = tape.row_bias_add(h, pwb);
    pre.push_back(h);
  }
  std::vector<Value> post;
  Value gamma = tape.use(*layer.bn.gamma);
  Value beta = tape.use(*layer.bn.beta);
  if (train) {
    BnRunning<S> run{layer.bn.running_mean->value, layer.bn.running_var->value};
    post = tape.batch_norm_train_multi(pre, gamma, beta, layer.bn.eps, &run, layer.bn.momentum);
    layer.bn.running_mean->value = run.mean;
    layer.bn.running_var->value = run.var;
  } else {
    for (Value h : pre) {
      post.push_back(tape.batch_norm_infer(h, gamma, beta, layer.bn.running_mean->value,
                                           layer.bn.running_var->value, layer.bn.eps));
    }
  }
  for (Value& h : post) h = tape.swish(h);
  return post;
}

}  // namespace detail

template <typename S>
std::vector<Value> conv_block_batch(Tape<S>& tape, const std::vector<Value>& xs,
                                    const BlockParams<S>& block, bool train) {
  for (Value x : xs) {
    if (tape.val(x).dim(1) != block.in_channels) {
      throw ConfigError("conv_block: input has " + std::to_string(tape.val(x).dim(1)) +
                        " channels, block expects " + std::to_string(block.in_channels));
    }
  }
  std::vector<Value> h = xs;
  for (const ConvLayer<S>& layer : block.layers) {
    h = detail::conv_layer_batch(tape, h, layer, train);
  }
  if (!block.spec.residual) return h;

  // SE gate on the conv stack output, projected skip, final activation.
  std::vector<Value> out;
  out.reserve(xs.size());
  const ProjLayer<S>& proj = *block.proj;
  Value pw = tape.use(*proj.weight);
  Value pb = tape.use(*proj.bias);
  std::vector<Value> proj_pre;
  for (Value x : xs) {
    Value p = proj.stride > 1 ? tape.subsample_rows(x, proj.stride) : x;
    p = tape.row_bias_add(tape.matmul(p, pw), pb);
    proj_pre.push_back(p);
  }
  std::vector<Value> proj_post;
  Value gamma = tape.use(*proj.bn.gamma);
  Value beta = tape.use(*proj.bn.beta);
  if (train) {
    BnRunning<S> run{proj.bn.running_mean->value, proj.bn.running_var->value};
    proj_post = tape.batch_norm_train_multi(proj_pre, gamma, beta, proj.bn.eps, &run, proj.bn.momentum);
    proj.bn.running_mean->value = run.mean;
    proj.bn.running_var->value = run.var;
  } else {
    for (Value p : proj_pre) {
      proj_post.push_back(tape.batch_norm_infer(p, gamma, beta, proj.bn.running_mean->value,
                                                proj.bn.running_var->value, proj.bn.eps));
    }
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    Value gated = block.se ? se_module(tape, h[i], *block.se) : h[i];
    out.push_back(tape.swish(tape.add(gated, proj_post[i])));
  }
  return out;
}

// Full encoder over a batch of utterances, applied layer-synchronously so
// train-mode batch norm pools statistics over every utterance in the step.
template <typename S>
std::vector<Value> encode_batch(Tape<S>& tape, const std::vector<Value>& features,
                                const EncoderParams<S>& enc, bool train) {
  if (features.empty()) throw ConfigError("encode: empty batch");
  for (Value f : features) {
    if (tape.val(f).rank() != 2 || tape.val(f).dim(1) != enc.config.input_dim) {
      throw ConfigError("encode: features must be [T x " + std::to_string(enc.config.input_dim) +
                        "], got " + shape_str(tape.val(f).shape()));
    }
    if (tape.val(f).dim(0) < 1) throw ConfigError("encode: empty input (T=0)");
  }
  std::vector<Value> h = features;
  for (const BlockParams<S>& block : enc.blocks) {
    h = conv_block_batch(tape, h, block, train);
  }
  return h;
}

// Single-utterance encode (inference statistics). Returns the [T' x D]
// representation; T' = ceil(T/8) under the default 8x configuration.
template <typename S>
Tensor<S> encode(const Tensor<S>& features, const EncoderParams<S>& enc) {
  Tape<S> tape;
  Value x = tape.leaf(features);
  std::vector<Value> out = encode_batch(tape, std::vector<Value>{x}, enc, /*train=*/false);
  return tape.val(out[0]);
}

}  // namespace contextnet

#endif  // CONTEXTNET_ENCODER_HPP_
