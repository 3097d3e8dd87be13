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

// RNN-transducer head: single-layer LSTM label encoder over a learned start
// embedding plus token embeddings, an additive tanh joint network, the
// exact marginal loss over all monotonic alignments, and greedy decoding.
//
// Loss lattice in log space, 0-based, t in [0,T), u in [0,U]:
//   alpha(0,0) = 0
//   alpha(t,u) = logaddexp(alpha(t-1,u) + blank(t-1,u),
//                          alpha(t,u-1) + label(t,u-1))
//   -log P    = -(alpha(T-1,U) + blank(T-1,U))
// The gradient uses the matching beta lattice; for every (t,u) the gradient
// over the vocabulary sums to zero.

#ifndef CONTEXTNET_TRANSDUCER_HPP_
#define CONTEXTNET_TRANSDUCER_HPP_

#include <string>
#include <utility>
#include <vector>

#include "contextnet/params.hpp"

namespace contextnet {

// Token inventory; index 0 is always the transducer blank.
struct Vocab {
  static constexpr int kBlankId = 0;
  static constexpr const char* kBlankSymbol = "<b>";

  std::vector<std::string> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
  void validate() const;

  static Vocab load(const std::string& path);
  void save(const std::string& path) const;
};

constexpr int kLabelEmbeddingDim = 640;
constexpr int kMaxSymbolsPerFrame = 10;

template <typename S>
struct DecoderParams {
  int vocab_size = 0;
  int hidden_dim = 0;  // H
  int joint_dim = 0;   // J
  int encoder_dim = 0;

  Parameter<S>* embedding = nullptr;  // [V x 640]
  Parameter<S>* start_embedding = nullptr;  // [1 x 640]
  Parameter<S>* lstm_wx = nullptr;    // [640 x 4H], gate order i,f,g,o
  Parameter<S>* lstm_wh = nullptr;    // [H x 4H]
  Parameter<S>* lstm_b = nullptr;     // [4H]
  Parameter<S>* enc_proj = nullptr;   // [Denc x J]
  Parameter<S>* pred_proj = nullptr;  // [H x J]
  Parameter<S>* joint_bias = nullptr; // [J]
  Parameter<S>* out_proj = nullptr;   // [J x V]
  Parameter<S>* out_bias = nullptr;   // [V]

  std::vector<Parameter<S>*> all() const {
    return {embedding, start_embedding, lstm_wx, lstm_wh, lstm_b,
            enc_proj,  pred_proj,       joint_bias, out_proj, out_bias};
  }
};

template <typename S, typename Rng>
DecoderParams<S> build_decoder_params(ParamStore<S>& store, int vocab_size, int hidden_dim,
                                      int joint_dim, int encoder_dim, Rng& rng,
                                      const std::string& prefix = "decoder") {
  if (vocab_size < 2) throw ConfigError("decoder: vocab must contain blank plus a token");
  DecoderParams<S> d;
  d.vocab_size = vocab_size;
  d.hidden_dim = hidden_dim;
  d.joint_dim = joint_dim;
  d.encoder_dim = encoder_dim;
  const S emb_std = S(1) / std::sqrt(S(kLabelEmbeddingDim));
  d.embedding = &store.create(prefix + ".embedding",
                              random_normal<S>({vocab_size, kLabelEmbeddingDim}, emb_std, rng));
  d.start_embedding = &store.create(prefix + ".start_embedding",
                                    random_normal<S>({1, kLabelEmbeddingDim}, emb_std, rng));
  d.lstm_wx = &store.create(prefix + ".lstm.wx",
                            random_normal<S>({kLabelEmbeddingDim, 4 * hidden_dim},
                                             S(1) / std::sqrt(S(kLabelEmbeddingDim)), rng));
  d.lstm_wh = &store.create(prefix + ".lstm.wh",
                            random_normal<S>({hidden_dim, 4 * hidden_dim},
                                             S(1) / std::sqrt(S(hidden_dim)), rng));
  d.lstm_b = &store.create(prefix + ".lstm.b", Tensor<S>({4 * hidden_dim}));
  d.enc_proj = &store.create(prefix + ".joint.enc_proj",
                             random_normal<S>({encoder_dim, joint_dim},
                                              S(1) / std::sqrt(S(encoder_dim)), rng));
  d.pred_proj = &store.create(prefix + ".joint.pred_proj",
                              random_normal<S>({hidden_dim, joint_dim},
                                               S(1) / std::sqrt(S(hidden_dim)), rng));
  d.joint_bias = &store.create(prefix + ".joint.bias", Tensor<S>({joint_dim}));
  d.out_proj = &store.create(prefix + ".joint.out_proj",
                             random_normal<S>({joint_dim, vocab_size},
                                              S(1) / std::sqrt(S(joint_dim)), rng));
  d.out_bias = &store.create(prefix + ".joint.out_bias", Tensor<S>({vocab_size}));
  return d;
}

// ----- LSTM cell -----

template <typename S>
struct LstmState {
  Value h;
  Value c;
};

// Standard cell: gates = x Wx + h Wh + b split as (i, f, g, o);
// c' = sigmoid(f) c + sigmoid(i) tanh(g); h' = sigmoid(o) tanh(c').
template <typename S>
LstmState<S> lstm_step(Tape<S>& tape, Value x, LstmState<S> state, Value wx, Value wh, Value b) {
  const std::int64_t h4 = tape.val(wx).dim(1);
  const std::int64_t hidden = h4 / 4;
  if (tape.val(state.h).dim(1) != hidden || tape.val(state.c).dim(1) != hidden) {
    throw ConfigError("lstm_step: state width does not match weights");
  }
  Value gates = tape.row_bias_add(tape.add(tape.matmul(x, wx), tape.matmul(state.h, wh)), b);
  Value gi = tape.sigmoid(tape.slice_cols(gates, 0, hidden));
  Value gf = tape.sigmoid(tape.slice_cols(gates, hidden, 2 * hidden));
  Value gg = tape.tanh(tape.slice_cols(gates, 2 * hidden, 3 * hidden));
  Value go = tape.sigmoid(tape.slice_cols(gates, 3 * hidden, 4 * hidden));
  Value c = tape.add(tape.mul(gf, state.c), tape.mul(gi, gg));
  Value h = tape.mul(go, tape.tanh(c));
  return {h, c};
}

// Label-encoder outputs g_0..g_U as one [U+1 x H] matrix: g_0 follows the
// learned start embedding, g_u follows token labels[u-1].
template <typename S>
Value label_encode(Tape<S>& tape, const std::vector<int>& labels, const DecoderParams<S>& d) {
  Value wx = tape.use(*d.lstm_wx);
  Value wh = tape.use(*d.lstm_wh);
  Value b = tape.use(*d.lstm_b);
  LstmState<S> st{tape.leaf(Tensor<S>({1, d.hidden_dim})), tape.leaf(Tensor<S>({1, d.hidden_dim}))};
  std::vector<Value> outs;
  outs.reserve(labels.size() + 1);
  st = lstm_step(tape, tape.use(*d.start_embedding), st, wx, wh, b);
  outs.push_back(st.h);
  Value emb = tape.use(*d.embedding);
  for (int label : labels) {
    Value row = tape.gather_rows(emb, {label});
    st = lstm_step(tape, row, st, wx, wh, b);
    outs.push_back(st.h);
  }
  return tape.stack_rows(outs);
}

// Joint logits for every (frame, label-position) pair:
// out_proj tanh(enc_proj enc_t + pred_proj pred_u + bias) + out_bias,
// laid out as [(T * U') x V] with row t*U' + u.
template <typename S>
Value joint_all(Tape<S>& tape, Value enc_out, Value pred_out, const DecoderParams<S>& d) {
  Value ae = tape.matmul(enc_out, tape.use(*d.enc_proj));
  Value ap = tape.row_bias_add(tape.matmul(pred_out, tape.use(*d.pred_proj)),
                               tape.use(*d.joint_bias));
  Value z = tape.tanh(tape.pairwise_sum(ae, ap));
  return tape.row_bias_add(tape.matmul(z, tape.use(*d.out_proj)), tape.use(*d.out_bias));
}

// Single (t, u) joint evaluation; enc_t is [1 x Denc], pred_u is [1 x H].
template <typename S>
Value joint_single(Tape<S>& tape, Value enc_t, Value pred_u, const DecoderParams<S>& d) {
  return joint_all(tape, enc_t, pred_u, d);
}

// ----- transducer loss -----

struct RnntLattice {
  double loss = 0.0;
  Tensor<double> grad;  // [(T * U') x V], d loss / d logits
};

// Exact loss and gradient from a [(T*(U+1)) x V] logit matrix. All lattice
// math runs in double regardless of the model precision.
template <typename S>
RnntLattice rnnt_loss_core(const Tensor<S>& logits, const std::vector<int>& labels,
                           std::int64_t t_len, std::int64_t v) {
  const std::int64_t u_len = static_cast<std::int64_t>(labels.size()) + 1;
  if (t_len < 1) throw UsageError("rnnt_loss: T must be >= 1");
  if (logits.rank() != 2 || logits.dim(0) != t_len * u_len || logits.dim(1) != v) {
    throw ConfigError("rnnt_loss: logits shape " + shape_str(logits.shape()) +
                      " does not match T=" + std::to_string(t_len) +
                      ", U+1=" + std::to_string(u_len) + ", V=" + std::to_string(v));
  }
  for (int label : labels) {
    if (label == Vocab::kBlankId) throw UsageError("rnnt_loss: labels must not contain blank");
    if (label < 0 || label >= v) throw UsageError("rnnt_loss: label out of vocabulary");
  }

  const std::int64_t rows = t_len * u_len;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  // Row-wise log-softmax.
  std::vector<double> lp(static_cast<std::size_t>(rows * v));
  for (std::int64_t r = 0; r < rows; ++r) {
    double mx = neg_inf;
    for (std::int64_t k = 0; k < v; ++k) mx = std::max(mx, static_cast<double>(logits.at(r, k)));
    double z = 0.0;
    for (std::int64_t k = 0; k < v; ++k) z += std::exp(static_cast<double>(logits.at(r, k)) - mx);
    const double lse = mx + std::log(z);
    for (std::int64_t k = 0; k < v; ++k) {
      lp[static_cast<std::size_t>(r * v + k)] = static_cast<double>(logits.at(r, k)) - lse;
    }
  }
  const auto blank_lp = [&](std::int64_t t, std::int64_t u) {
    return lp[static_cast<std::size_t>((t * u_len + u) * v + Vocab::kBlankId)];
  };
  const auto label_lp = [&](std::int64_t t, std::int64_t u) {
    return lp[static_cast<std::size_t>((t * u_len + u) * v + labels[static_cast<std::size_t>(u)])];
  };

  std::vector<double> alpha(static_cast<std::size_t>(rows), neg_inf);
  alpha[0] = 0.0;
  for (std::int64_t t = 0; t < t_len; ++t) {
    for (std::int64_t u = 0; u < u_len; ++u) {
      if (t == 0 && u == 0) continue;
      const double from_blank = t > 0 ? alpha[static_cast<std::size_t>((t - 1) * u_len + u)] + blank_lp(t - 1, u) : neg_inf;
      const double from_label = u > 0 ? alpha[static_cast<std::size_t>(t * u_len + u - 1)] + label_lp(t, u - 1) : neg_inf;
      alpha[static_cast<std::size_t>(t * u_len + u)] = logaddexp(from_blank, from_label);
    }
  }
  const double log_p = alpha[static_cast<std::size_t>(rows - 1)] + blank_lp(t_len - 1, u_len - 1);

  std::vector<double> beta(static_cast<std::size_t>(rows), neg_inf);
  beta[static_cast<std::size_t>(rows - 1)] = blank_lp(t_len - 1, u_len - 1);
  for (std::int64_t t = t_len - 1; t >= 0; --t) {
    for (std::int64_t u = u_len - 1; u >= 0; --u) {
      if (t == t_len - 1 && u == u_len - 1) continue;
      const double via_blank =
          t + 1 < t_len ? blank_lp(t, u) + beta[static_cast<std::size_t>((t + 1) * u_len + u)] : neg_inf;
      const double via_label =
          u + 1 < u_len ? label_lp(t, u) + beta[static_cast<std::size_t>(t * u_len + u + 1)] : neg_inf;
      beta[static_cast<std::size_t>(t * u_len + u)] = logaddexp(via_blank, via_label);
    }
  }

  RnntLattice result;
  result.loss = -log_p;
  result.grad = Tensor<double>({rows, v});
  for (std::int64_t t = 0; t < t_len; ++t) {
    for (std::int64_t u = 0; u < u_len; ++u) {
      const std::int64_t r = t * u_len + u;
      // Posterior mass on the outgoing blank / label edges of node (t,u).
      double occ_blank = 0.0, occ_label = 0.0;
      if (t + 1 < t_len) {
        occ_blank = std::exp(alpha[static_cast<std::size_t>(r)] + blank_lp(t, u) +
                             beta[static_cast<std::size_t>((t + 1) * u_len + u)] - log_p);
      } else if (u == u_len - 1) {
        occ_blank = std::exp(alpha[static_cast<std::size_t>(r)] + blank_lp(t, u) - log_p);
      }
      if (u + 1 < u_len) {
        occ_label = std::exp(alpha[static_cast<std::size_t>(r)] + label_lp(t, u) +
                             beta[static_cast<std::size_t>(r + 1)] - log_p);
      }
      const double occ = occ_blank + occ_label;
      for (std::int64_t k = 0; k < v; ++k) {
        double g = occ * std::exp(lp[static_cast<std::size_t>(r * v + k)]);
        if (k == Vocab::kBlankId) g -= occ_blank;
        if (u + 1 < u_len && k == labels[static_cast<std::size_t>(u)]) g -= occ_label;
        result.grad.at(r, k) = g;
      }
    }
  }
  return result;
}

// Spec-facing form: logits laid out [T x (U+1) x V].
template <typename S>
std::pair<double, Tensor<S>> rnnt_loss(const Tensor<S>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 3) throw ConfigError("rnnt_loss: expected [T x (U+1) x V] logits");
  const std::int64_t t_len = logits.dim(0), u_len = logits.dim(1), v = logits.dim(2);
  if (u_len != static_cast<std::int64_t>(labels.size()) + 1) {
    throw ConfigError("rnnt_loss: logits U+1 axis is " + std::to_string(u_len) + ", labels need " +
                      std::to_string(labels.size() + 1));
  }
  Tensor<S> flat({t_len * u_len, v}, logits.vec());
  RnntLattice lat = rnnt_loss_core(flat, labels, t_len, v);
  Tensor<S> grad(logits.shape());
  for (std::int64_t i = 0; i < grad.numel(); ++i) grad[i] = static_cast<S>(lat.grad[i]);
  return {lat.loss, grad};
}

// Tape node for the fused loss; input logits are [(T*(U+1)) x V].
template <typename S>
Value rnnt_loss_op(Tape<S>& tape, Value logits, std::vector<int> labels, std::int64_t t_len) {
  const Tensor<S>& lv = tape.val(logits);
  auto lat = std::make_shared<RnntLattice>(rnnt_loss_core(lv, labels, t_len, lv.dim(1)));
  Value o = tape.leaf(Tensor<S>::scalar(static_cast<S>(lat->loss)));
  // Backward scales the precomputed lattice gradient by the upstream grad.
  struct Pull {
    Value logits;
    Value o;
    std::shared_ptr<RnntLattice> lat;
    void operator()(Tape<S>& t) const {
      const S g = t.grad(o)[0];
      Tensor<S>& gl = t.grad_mut(logits);
      for (std::int64_t i = 0; i < gl.numel(); ++i) {
        gl[i] += g * static_cast<S>(lat->grad[i]);
      }
    }
  };
  tape.record_external(Pull{logits, o, lat});
  return o;
}

// Full per-utterance loss: label-encode, joint over all pairs, lattice.
template <typename S>
Value transducer_loss(Tape<S>& tape, Value enc_out, const std::vector<int>& labels,
                      const DecoderParams<S>& d) {
  Value pred = label_encode(tape, labels, d);
  Value logits = joint_all(tape, enc_out, pred, d);
  return rnnt_loss_op(tape, logits, labels, tape.val(enc_out).dim(0));
}

// ----- greedy decode -----

// Frame-synchronous greedy decode: argmax per frame, emit non-blank tokens
// and advance the label encoder, move to the next frame on blank or after
// kMaxSymbolsPerFrame emissions. Never emits blank.
template <typename S>
std::vector<int> greedy_decode(const Tensor<S>& enc_out, const DecoderParams<S>& d) {
  std::vector<int> tokens;
  if (enc_out.dim(0) == 0) return tokens;
  if (enc_out.dim(1) != d.encoder_dim) {
    throw ConfigError("greedy_decode: encoder output dim " + std::to_string(enc_out.dim(1)) +
                      " does not match joint (" + std::to_string(d.encoder_dim) + ")");
  }
  const std::int64_t t_len = enc_out.dim(0);
  const std::int64_t hidden = d.hidden_dim;

  Tensor<S> h({1, hidden}), c({1, hidden});
  const auto feed = [&](const Tensor<S>& x) {
    Tensor<S> gates = kernels::row_bias_add(
        kernels::matmul(x, d.lstm_wx->value),
        d.lstm_b->value);
    Tensor<S> hh = kernels::matmul(h, d.lstm_wh->value);
    for (std::int64_t i = 0; i < gates.numel(); ++i) gates[i] += hh[i];
    Tensor<S> nc({1, hidden}), nh({1, hidden});
    for (std::int64_t j = 0; j < hidden; ++j) {
      const S gi = stable_sigmoid(gates[j]);
      const S gf = stable_sigmoid(gates[hidden + j]);
      const S gg = std::tanh(gates[2 * hidden + j]);
      const S go = stable_sigmoid(gates[3 * hidden + j]);
      nc[j] = gf * c[j] + gi * gg;
      nh[j] = go * std::tanh(nc[j]);
    }
    h = nh;
    c = nc;
  };
  feed(d.start_embedding->value);

  // pred-side joint projection of the current label-encoder state.
  Tensor<S> pred_j = kernels::row_bias_add(kernels::matmul(h, d.pred_proj->value),
                                           d.joint_bias->value);
  Tensor<S> enc_j = kernels::matmul(enc_out, d.enc_proj->value);

  Tensor<S> tok_emb({1, kLabelEmbeddingDim});
  for (std::int64_t t = 0; t < t_len; ++t) {
    for (int emitted = 0; emitted < kMaxSymbolsPerFrame; ++emitted) {
      Tensor<S> z({1, d.joint_dim});
      for (std::int64_t j = 0; j < d.joint_dim; ++j) {
        z[j] = std::tanh(enc_j.at(t, j) + pred_j[j]);
      }
      Tensor<S> logits = kernels::row_bias_add(kernels::matmul(z, d.out_proj->value),
                                               d.out_bias->value);
      int best = 0;
      for (int k = 1; k < d.vocab_size; ++k) {
        if (logits[k] > logits[best]) best = k;
      }
      if (best == Vocab::kBlankId) break;
      tokens.push_back(best);
      std::copy(d.embedding->value.data() + best * kLabelEmbeddingDim,
                d.embedding->value.data() + (best + 1) * kLabelEmbeddingDim, tok_emb.data());
      feed(tok_emb);
      pred_j = kernels::row_bias_add(kernels::matmul(h, d.pred_proj->value),
                                     d.joint_bias->value);
    }
  }
  return tokens;
}

}  // namespace contextnet

#endif  // CONTEXTNET_TRANSDUCER_HPP_
