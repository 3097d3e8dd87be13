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

// Reverse-mode autodiff on a define-by-run tape. Operations append nodes in
// execution order, so the reverse sweep visits each node exactly once in
// reverse topological order. A tape is single-owner: build one graph, call
// backward() once, then read gradients.

#ifndef CONTEXTNET_TAPE_HPP_
#define CONTEXTNET_TAPE_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "contextnet/kernels.hpp"
#include "contextnet/tensor.hpp"

namespace contextnet {

// A named trainable tensor. Models own Parameters; tapes reference them by
// identity so gradients can be fetched per parameter after backward().
template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> value;
};

// Running batch-norm statistics; mutated as a side effect of train-mode
// forward passes, never differentiated through.
template <typename S>
struct BnRunning {
  Tensor<S> mean;
  Tensor<S> var;
};

struct Value {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value leaf(Tensor<S> v) {
    slots_.push_back(Slot{std::move(v), Tensor<S>(), nullptr});
    slots_.back().grad = Tensor<S>(slots_.back().value.shape());
    return Value{static_cast<std::int32_t>(slots_.size() - 1)};
  }

  // Stage a parameter; repeated use of the same parameter yields the same
  // slot so gradients from every use accumulate together.
  Value use(Parameter<S>& p) {
    auto it = param_slots_.find(&p);
    if (it != param_slots_.end()) return it->second;
    Value v = leaf(p.value);
    slots_[static_cast<std::size_t>(v.id)].param = &p;
    param_slots_.emplace(&p, v);
    return v;
  }

  const Tensor<S>& val(Value v) const { return slots_[idx(v)].value; }
  const Tensor<S>& grad(Value v) const { return slots_[idx(v)].grad; }
  Tensor<S>& grad_mut(Value v) { return slots_[idx(v)].grad; }

  // Gradient for a parameter; zero if the parameter never reached the loss.
  Tensor<S> grad_of(const Parameter<S>& p) const {
    auto it = param_slots_.find(&p);
    if (it == param_slots_.end()) return Tensor<S>(p.value.shape());
    return slots_[idx(it->second)].grad;
  }

  std::size_t num_nodes() const { return nodes_.size(); }

  // Hook for fused operations defined outside the tape (the transducer
  // lattice); the callable pulls output grads into input grads like any
  // built-in node.
  void record_external(std::function<void(Tape&)> pull) { record(std::move(pull)); }

  void backward(Value loss) {
    if (val(loss).numel() != 1) {
      throw UsageError("backward: loss must be scalar, got shape " +
                       shape_str(val(loss).shape()));
    }
    if (ran_backward_) throw UsageError("backward: tape already consumed");
    ran_backward_ = true;
    grad_mut(loss)[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
  }

  // ----- elementwise -----

  Value add(Value a, Value b) {
    check_same(a, b, "add");
    Tensor<S> out = val(a);
    const Tensor<S>& bv = val(b);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    Value o = leaf(std::move(out));
    record([a, b, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& ga = t.grad_mut(a);
      Tensor<S>& gb = t.grad_mut(b);
      for (std::int64_t i = 0; i < go.numel(); ++i) {
        ga[i] += go[i];
        gb[i] += go[i];
      }
    });
    return o;
  }

  Value mul(Value a, Value b) {
    check_same(a, b, "mul");
    Tensor<S> out = val(a);
    const Tensor<S>& bv = val(b);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    Value o = leaf(std::move(out));
    record([a, b, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& av = t.val(a);
      const Tensor<S>& bv2 = t.val(b);
      Tensor<S>& ga = t.grad_mut(a);
      Tensor<S>& gb = t.grad_mut(b);
      for (std::int64_t i = 0; i < go.numel(); ++i) {
        ga[i] += go[i] * bv2[i];
        gb[i] += go[i] * av[i];
      }
    });
    return o;
  }

  Value scale(Value a, S c) {
    Tensor<S> out = val(a);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    Value o = leaf(std::move(out));
    record([a, o, c](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& ga = t.grad_mut(a);
      for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += c * go[i];
    });
    return o;
  }

  Value swish(Value a) {
    Value o = leaf(kernels::swish(val(a)));
    record([a, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& av = t.val(a);
      Tensor<S>& ga = t.grad_mut(a);
      for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * swish_grad_scalar(av[i]);
    });
    return o;
  }

  Value sigmoid(Value a) {
    Value o = leaf(kernels::sigmoid(val(a)));
    record([a, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& ov = t.val(o);
      Tensor<S>& ga = t.grad_mut(a);
      for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * ov[i] * (S(1) - ov[i]);
    });
    return o;
  }

  Value tanh(Value a) {
    Value o = leaf(kernels::tanh(val(a)));
    record([a, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& ov = t.val(o);
      Tensor<S>& ga = t.grad_mut(a);
      for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * (S(1) - ov[i] * ov[i]);
    });
    return o;
  }

  Value relu(Value a) {
    Value o = leaf(kernels::relu(val(a)));
    record([a, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& av = t.val(a);
      Tensor<S>& ga = t.grad_mut(a);
      for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += av[i] > S(0) ? go[i] : S(0);
    });
    return o;
  }

  // ----- linear algebra -----

  Value matmul(Value a, Value b) {
    Value o = leaf(kernels::matmul(val(a), val(b)));
    record([a, b, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& av = t.val(a);
      const Tensor<S>& bv = t.val(b);
      Tensor<S>& ga = t.grad_mut(a);
      Tensor<S>& gb = t.grad_mut(b);
      const std::int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
      for (std::int64_t i = 0; i < m; ++i) {
        const S* grow = go.data() + i * n;
        const S* arow = av.data() + i * k;
        S* garow = ga.data() + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
          const S* brow = bv.data() + p * n;
          S acc = S(0);
          for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          garow[p] += acc;
          S* gbrow = gb.data() + p * n;
          const S apv = arow[p];
          if (apv != S(0)) {
            for (std::int64_t j = 0; j < n; ++j) gbrow[j] += apv * grow[j];
          }
        }
      }
    });
    return o;
  }

  Value row_bias_add(Value x, Value b) {
    Value o = leaf(kernels::row_bias_add(val(x), val(b)));
    record([x, b, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& gx = t.grad_mut(x);
      Tensor<S>& gb = t.grad_mut(b);
      const std::int64_t rows = go.dim(0), d = go.dim(1);
      for (std::int64_t i = 0; i < rows; ++i) {
        const S* grow = go.data() + i * d;
        S* gxrow = gx.data() + i * d;
        for (std::int64_t c = 0; c < d; ++c) {
          gxrow[c] += grow[c];
          gb[c] += grow[c];
        }
      }
    });
    return o;
  }

  Value row_gate_mul(Value x, Value g) {
    Value o = leaf(kernels::row_gate_mul(val(x), val(g)));
    record([x, g, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& xv = t.val(x);
      const Tensor<S>& gv = t.val(g);
      Tensor<S>& gx = t.grad_mut(x);
      Tensor<S>& gg = t.grad_mut(g);
      const std::int64_t rows = go.dim(0), d = go.dim(1);
      for (std::int64_t i = 0; i < rows; ++i) {
        const S* grow = go.data() + i * d;
        const S* xrow = xv.data() + i * d;
        S* gxrow = gx.data() + i * d;
        for (std::int64_t c = 0; c < d; ++c) {
          gxrow[c] += grow[c] * gv[c];
          gg[c] += grow[c] * xrow[c];
        }
      }
    });
    return o;
  }

  // ----- reductions and views -----

  Value mean_rows(Value x) {
    Value o = leaf(kernels::mean_rows(val(x)));
    record([x, o](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& gx = t.grad_mut(x);
      const std::int64_t rows = t.val(x).dim(0), d = go.dim(1);
      const S inv = S(1) / static_cast<S>(rows);
      for (std::int64_t i = 0; i < rows; ++i) {
        S* gxrow = gx.data() + i * d;
        for (std::int64_t c = 0; c < d; ++c) gxrow[c] += go[c] * inv;
      }
    });
    return o;
  }

  Value sliding_mean(Value x, std::int64_t window) {
    Value o = leaf(kernels::sliding_mean(val(x), window));
    record([x, o, window](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& gx = t.grad_mut(x);
      const std::int64_t rows = go.dim(0), d = go.dim(1);
      const std::int64_t hl = (window - 1) / 2, hr = window / 2;
      for (std::int64_t i = 0; i < rows; ++i) {
        const std::int64_t lo = std::max<std::int64_t>(0, i - hl);
        const std::int64_t hi = std::min<std::int64_t>(rows - 1, i + hr);
        const S inv = S(1) / static_cast<S>(hi - lo + 1);
        const S* grow = go.data() + i * d;
        for (std::int64_t j = lo; j <= hi; ++j) {
          S* gxrow = gx.data() + j * d;
          for (std::int64_t c = 0; c < d; ++c) gxrow[c] += grow[c] * inv;
        }
      }
    });
    return o;
  }

  Value subsample_rows(Value x, std::int64_t stride) {
    Value o = leaf(kernels::subsample_rows(val(x), stride));
    record([x, o, stride](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& gx = t.grad_mut(x);
      const std::int64_t rows = go.dim(0), d = go.dim(1);
      for (std::int64_t i = 0; i < rows; ++i) {
        const S* grow = go.data() + i * d;
        S* gxrow = gx.data() + i * stride * d;
        for (std::int64_t c = 0; c < d; ++c) gxrow[c] += grow[c];
      }
    });
    return o;
  }

  Value slice_cols(Value x, std::int64_t c0, std::int64_t c1) {
    const Tensor<S>& xv = val(x);
    if (c0 < 0 || c1 > xv.dim(1) || c0 >= c1) throw ConfigError("slice_cols: bad range");
    const std::int64_t rows = xv.dim(0), w = c1 - c0, d = xv.dim(1);
    Tensor<S> out({rows, w});
    for (std::int64_t i = 0; i < rows; ++i) {
      std::copy(xv.data() + i * d + c0, xv.data() + i * d + c1, out.data() + i * w);
    }
    Value o = leaf(std::move(out));
    record([x, o, c0, w](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& gx = t.grad_mut(x);
      const std::int64_t rows2 = go.dim(0), d2 = gx.dim(1);
      for (std::int64_t i = 0; i < rows2; ++i) {
        const S* grow = go.data() + i * w;
        S* gxrow = gx.data() + i * d2 + c0;
        for (std::int64_t c = 0; c < w; ++c) gxrow[c] += grow[c];
      }
    });
    return o;
  }

  // Stack inputs (each [r_i x D]) vertically into one [sum(r_i) x D] tensor.
  Value stack_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw ConfigError("stack_rows: no inputs");
    const std::int64_t d = val(parts[0]).dim(1);
    std::int64_t rows = 0;
    for (Value p : parts) {
      if (val(p).dim(1) != d) throw ConfigError("stack_rows: column mismatch");
      rows += val(p).dim(0);
    }
    Tensor<S> out({rows, d});
    std::int64_t r = 0;
    for (Value p : parts) {
      const Tensor<S>& pv = val(p);
      std::copy(pv.data(), pv.data() + pv.numel(), out.data() + r * d);
      r += pv.dim(0);
    }
    Value o = leaf(std::move(out));
    record([parts, o, d](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      std::int64_t r2 = 0;
      for (Value p : parts) {
        Tensor<S>& gp = t.grad_mut(p);
        const std::int64_t n = gp.numel();
        const S* src = go.data() + r2 * d;
        for (std::int64_t i = 0; i < n; ++i) gp[i] += src[i];
        r2 += gp.dim(0);
      }
    });
    return o;
  }

  // out[i, :] = table[indices[i], :]; backward scatter-adds into the table.
  Value gather_rows(Value table, std::vector<std::int64_t> indices) {
    const Tensor<S>& tv = val(table);
    const std::int64_t d = tv.dim(1);
    Tensor<S> out({static_cast<std::int64_t>(indices.size()), d});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 0 || indices[i] >= tv.dim(0)) throw ConfigError("gather_rows: index out of range");
      std::copy(tv.data() + indices[i] * d, tv.data() + (indices[i] + 1) * d,
                out.data() + static_cast<std::int64_t>(i) * d);
    }
    Value o = leaf(std::move(out));
    record([table, o, indices = std::move(indices), d](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& gt = t.grad_mut(table);
      for (std::size_t i = 0; i < indices.size(); ++i) {
        const S* grow = go.data() + static_cast<std::int64_t>(i) * d;
        S* trow = gt.data() + indices[i] * d;
        for (std::int64_t c = 0; c < d; ++c) trow[c] += grow[c];
      }
    });
    return o;
  }

  // out[t*U + u, :] = a[t, :] + b[u, :]; the joint network's broadcast sum.
  Value pairwise_sum(Value a, Value b) {
    const Tensor<S>& av = val(a);
    const Tensor<S>& bv = val(b);
    if (av.dim(1) != bv.dim(1)) throw ConfigError("pairwise_sum: width mismatch");
    const std::int64_t ta = av.dim(0), ub = bv.dim(0), d = av.dim(1);
    Tensor<S> out({ta * ub, d});
    for (std::int64_t t = 0; t < ta; ++t) {
      const S* arow = av.data() + t * d;
      for (std::int64_t u = 0; u < ub; ++u) {
        const S* brow = bv.data() + u * d;
        S* orow = out.data() + (t * ub + u) * d;
        for (std::int64_t c = 0; c < d; ++c) orow[c] = arow[c] + brow[c];
      }
    }
    Value o = leaf(std::move(out));
    record([a, b, o, ta, ub, d](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      Tensor<S>& ga = t.grad_mut(a);
      Tensor<S>& gb = t.grad_mut(b);
      for (std::int64_t ti = 0; ti < ta; ++ti) {
        S* garow = ga.data() + ti * d;
        for (std::int64_t u = 0; u < ub; ++u) {
          const S* grow = go.data() + (ti * ub + u) * d;
          S* gbrow = gb.data() + u * d;
          for (std::int64_t c = 0; c < d; ++c) {
            garow[c] += grow[c];
            gbrow[c] += grow[c];
          }
        }
      }
    });
    return o;
  }

  Value sum_all(Value x) {
    const Tensor<S>& xv = val(x);
    S acc = S(0);
    for (std::int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
    Value o = leaf(Tensor<S>::scalar(acc));
    record([x, o](Tape& t) {
      const S g = t.grad(o)[0];
      Tensor<S>& gx = t.grad_mut(x);
      for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    });
    return o;
  }

  // ----- convolution -----

  Value conv1d_depthwise(Value x, Value kernel, std::int64_t stride) {
    Value o = leaf(kernels::conv1d_depthwise(val(x), val(kernel), stride));
    record([x, kernel, o, stride](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& xv = t.val(x);
      const Tensor<S>& kv = t.val(kernel);
      Tensor<S>& gx = t.grad_mut(x);
      Tensor<S>& gk = t.grad_mut(kernel);
      const std::int64_t t_in = xv.dim(0), d = xv.dim(1), k = kv.dim(0);
      const std::int64_t left = (k - 1) / 2;
      const std::int64_t t_out = go.dim(0);
      for (std::int64_t to = 0; to < t_out; ++to) {
        const std::int64_t base = to * stride - left;
        const std::int64_t j0 = base < 0 ? -base : 0;
        const std::int64_t j1 = std::min<std::int64_t>(k, t_in - base);
        const S* grow = go.data() + to * d;
        for (std::int64_t j = j0; j < j1; ++j) {
          const S* xr = xv.data() + (base + j) * d;
          const S* kr = kv.data() + j * d;
          S* gxr = gx.data() + (base + j) * d;
          S* gkr = gk.data() + j * d;
          for (std::int64_t c = 0; c < d; ++c) {
            gxr[c] += grow[c] * kr[c];
            gkr[c] += grow[c] * xr[c];
          }
        }
      }
    });
    return o;
  }

  // ----- batch norm -----

  // Train-mode batch norm over the frames of every tensor in xs jointly
  // (one statistics pool per step, shared across utterances). Gradients
  // flow through the batch statistics. Running stats, when given, are
  // updated as running = momentum * running + (1 - momentum) * batch.
  std::vector<Value> batch_norm_train_multi(const std::vector<Value>& xs, Value gamma,
                                            Value beta, S eps, BnRunning<S>* running,
                                            S momentum) {
    if (xs.empty()) throw ConfigError("batch_norm: no inputs");
    const std::int64_t d = val(xs[0]).dim(1);
    if (val(gamma).numel() != d || val(beta).numel() != d) {
      throw ConfigError("batch_norm: parameter length does not match channels");
    }
    if (eps <= S(0)) throw ConfigError("batch_norm: eps must be positive");
    std::vector<const Tensor<S>*> ptrs;
    std::int64_t n = 0;
    for (Value v : xs) {
      if (val(v).dim(1) != d) throw ConfigError("batch_norm: channel mismatch across batch");
      ptrs.push_back(&val(v));
      n += val(v).dim(0);
    }
    auto stats = std::make_shared<kernels::BatchStats>(kernels::batch_stats(ptrs));
    if (running != nullptr) {
      for (std::int64_t c = 0; c < d; ++c) {
        running->mean[c] = momentum * running->mean[c] +
                           (S(1) - momentum) * static_cast<S>(stats->mean[static_cast<std::size_t>(c)]);
        running->var[c] = momentum * running->var[c] +
                          (S(1) - momentum) * static_cast<S>(stats->var[static_cast<std::size_t>(c)]);
      }
    }
    std::vector<Value> outs;
    outs.reserve(xs.size());
    for (Value v : xs) {
      outs.push_back(leaf(kernels::batch_norm_apply(val(v), stats->mean, stats->var,
                                                    val(gamma), val(beta), eps)));
    }
    record([xs, outs, gamma, beta, stats, eps, d, n](Tape& t) {
      const Tensor<S>& gv = t.val(gamma);
      // Accumulate dbeta = sum(go) and dgamma = sum(go * xhat) over the pool.
      std::vector<double> dbeta(static_cast<std::size_t>(d), 0.0);
      std::vector<double> dgamma(static_cast<std::size_t>(d), 0.0);
      std::vector<double> inv_sigma(static_cast<std::size_t>(d));
      for (std::int64_t c = 0; c < d; ++c) {
        inv_sigma[static_cast<std::size_t>(c)] =
            1.0 / std::sqrt(stats->var[static_cast<std::size_t>(c)] + static_cast<double>(eps));
      }
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const Tensor<S>& go = t.grad(outs[i]);
        const Tensor<S>& xv = t.val(xs[i]);
        const std::int64_t rows = xv.dim(0);
        for (std::int64_t r = 0; r < rows; ++r) {
          const S* grow = go.data() + r * d;
          const S* xrow = xv.data() + r * d;
          for (std::int64_t c = 0; c < d; ++c) {
            const std::size_t cc = static_cast<std::size_t>(c);
            const double xhat = (static_cast<double>(xrow[c]) - stats->mean[cc]) * inv_sigma[cc];
            dbeta[cc] += static_cast<double>(grow[c]);
            dgamma[cc] += static_cast<double>(grow[c]) * xhat;
          }
        }
      }
      {
        Tensor<S>& gg = t.grad_mut(gamma);
        Tensor<S>& gb = t.grad_mut(beta);
        for (std::int64_t c = 0; c < d; ++c) {
          gg[c] += static_cast<S>(dgamma[static_cast<std::size_t>(c)]);
          gb[c] += static_cast<S>(dbeta[static_cast<std::size_t>(c)]);
        }
      }
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const Tensor<S>& go = t.grad(outs[i]);
        const Tensor<S>& xv = t.val(xs[i]);
        Tensor<S>& gx = t.grad_mut(xs[i]);
        const std::int64_t rows = xv.dim(0);
        for (std::int64_t r = 0; r < rows; ++r) {
          const S* grow = go.data() + r * d;
          const S* xrow = xv.data() + r * d;
          S* gxrow = gx.data() + r * d;
          for (std::int64_t c = 0; c < d; ++c) {
            const std::size_t cc = static_cast<std::size_t>(c);
            const double xhat = (static_cast<double>(xrow[c]) - stats->mean[cc]) * inv_sigma[cc];
            const double dxhat = static_cast<double>(grow[c]) -
                                 inv_n * (dbeta[cc] + xhat * dgamma[cc]);
            gxrow[c] += static_cast<S>(static_cast<double>(gv[c]) * inv_sigma[cc] * dxhat);
          }
        }
      }
    });
    return outs;
  }

  Value batch_norm_train(Value x, Value gamma, Value beta, S eps,
                         BnRunning<S>* running, S momentum) {
    return batch_norm_train_multi({x}, gamma, beta, eps, running, momentum)[0];
  }

  Value batch_norm_infer(Value x, Value gamma, Value beta, const Tensor<S>& running_mean,
                         const Tensor<S>& running_var, S eps) {
    const std::int64_t d = val(x).dim(1);
    if (running_mean.numel() != d || running_var.numel() != d) {
      throw ConfigError("batch_norm: running stats length does not match channels");
    }
    std::vector<double> mean(static_cast<std::size_t>(d)), var(static_cast<std::size_t>(d));
    for (std::int64_t c = 0; c < d; ++c) {
      if (running_var[c] <= S(0)) {
        throw NumericError("batch_norm: non-positive running variance at channel " +
                           std::to_string(c));
      }
      mean[static_cast<std::size_t>(c)] = static_cast<double>(running_mean[c]);
      var[static_cast<std::size_t>(c)] = static_cast<double>(running_var[c]);
    }
    Value o = leaf(kernels::batch_norm_apply(val(x), mean, var, val(gamma), val(beta), eps));
    auto shr = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>(mean, var);
    record([x, gamma, beta, o, shr, eps, d](Tape& t) {
      const Tensor<S>& go = t.grad(o);
      const Tensor<S>& xv = t.val(x);
      const Tensor<S>& gv = t.val(gamma);
      Tensor<S>& gx = t.grad_mut(x);
      Tensor<S>& gg = t.grad_mut(gamma);
      Tensor<S>& gb = t.grad_mut(beta);
      const std::int64_t rows = xv.dim(0);
      for (std::int64_t c = 0; c < d; ++c) {
        const std::size_t cc = static_cast<std::size_t>(c);
        const double inv = 1.0 / std::sqrt(shr->second[cc] + static_cast<double>(eps));
        double dg = 0.0, db = 0.0;
        for (std::int64_t r = 0; r < rows; ++r) {
          const double g = static_cast<double>(go.at(r, c));
          dg += g * (static_cast<double>(xv.at(r, c)) - shr->first[cc]) * inv;
          db += g;
          gx.at(r, c) += static_cast<S>(g * static_cast<double>(gv[c]) * inv);
        }
        gg[c] += static_cast<S>(dg);
        gb[c] += static_cast<S>(db);
      }
    });
    return o;
  }

 private:
  struct Slot {
    Tensor<S> value;
    Tensor<S> grad;
    Parameter<S>* param;
  };

  static std::size_t idx(Value v) { return static_cast<std::size_t>(v.id); }

  void check_same(Value a, Value b, const char* op) const {
    if (!val(a).same_shape(val(b))) {
      throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(val(a).shape()) +
                        " vs " + shape_str(val(b).shape()));
    }
  }

  void record(std::function<void(Tape&)> pull) { nodes_.push_back(std::move(pull)); }

  std::vector<Slot> slots_;
  std::vector<std::function<void(Tape&)>> nodes_;
  std::unordered_map<const Parameter<S>*, Value> param_slots_;
  bool ran_backward_ = false;
};

}  // namespace contextnet

#endif  // CONTEXTNET_TAPE_HPP_
