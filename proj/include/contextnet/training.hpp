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

#ifndef CONTEXTNET_TRAINING_HPP_
#define CONTEXTNET_TRAINING_HPP_

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "contextnet/params.hpp"
#include "contextnet/tensor.hpp"

namespace contextnet {

struct TrainConfig {
  int warmup_steps = 15000;
  double peak_lr = 0.0025;
  double l2_weight = 1e-6;
  int spec_F = 27;            // frequency mask parameter
  int spec_freq_masks = 1;
  int spec_time_masks = 10;
  double spec_pS = 0.05;      // max time-mask ratio
  double vn_std = 0.075;      // variational noise on decoder weights
  int vn_delay_steps = 2000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  int batch_size = 8;
  long max_steps = 10000;
  std::uint64_t seed = 1;
  int eval_interval = 250;
  double stop_token_error = -1.0;  // early stop threshold; negative disables

  void validate() const {
    if (warmup_steps < 1) throw ConfigError("train config: warmup_steps must be >= 1");
    if (peak_lr <= 0.0) throw ConfigError("train config: peak_lr must be positive");
    if (l2_weight < 0.0) throw ConfigError("train config: l2_weight must be >= 0");
    if (spec_pS < 0.0 || spec_pS > 1.0) throw ConfigError("train config: spec_pS must be in [0, 1]");
    if (spec_F < 0 || spec_freq_masks < 0 || spec_time_masks < 0) {
      throw ConfigError("train config: mask counts must be >= 0");
    }
    if (vn_std < 0.0) throw ConfigError("train config: vn_std must be >= 0");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (max_steps < 1) throw ConfigError("train config: max_steps must be >= 1");
    if (eval_interval < 1) throw ConfigError("train config: eval_interval must be >= 1");
  }
};

// Transformer schedule: linear warmup to peak_lr at warmup_steps, then
// inverse square-root decay. Continuous at the peak.
inline double lr_schedule(long step, const TrainConfig& cfg) {
  if (step < 1) throw UsageError("lr_schedule: step must be >= 1");
  const double w = static_cast<double>(cfg.warmup_steps);
  const double s = static_cast<double>(step);
  return cfg.peak_lr * std::min(s / w, std::sqrt(w / s));
}

// One bias-corrected Adam update on a single tensor; the l2 term joins the
// gradient, matching weight regularization on all trainable weights.
template <typename S>
void adam_update(Tensor<S>& param, const Tensor<S>& grad, Tensor<S>& m, Tensor<S>& v,
                 long step, double lr, const TrainConfig& cfg) {
  if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v)) {
    throw ConfigError("adam_update: shape mismatch");
  }
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::int64_t i = 0; i < param.numel(); ++i) {
    const double g = static_cast<double>(grad[i]) + cfg.l2_weight * static_cast<double>(param[i]);
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
    m[i] = static_cast<S>(mi);
    v[i] = static_cast<S>(vi);
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    param[i] = static_cast<S>(static_cast<double>(param[i]) - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
  }
}

template <typename S>
class AdamOptimizer {
 public:
  AdamOptimizer(ParamStore<S>& store, TrainConfig cfg) : cfg_(std::move(cfg)) {
    for (Parameter<S>* p : store.trainable()) {
      states_.push_back(State{p, Tensor<S>(p->value.shape()), Tensor<S>(p->value.shape())});
    }
  }

  long steps_taken() const { return step_; }

  void step(const Tape<S>& tape, double lr) {
    ++step_;
    for (State& st : states_) {
      const Tensor<S> g = tape.grad_of(*st.param);
      adam_update(st.param->value, g, st.m, st.v, step_, lr, cfg_);
    }
  }

 private:
  struct State {
    Parameter<S>* param;
    Tensor<S> m;
    Tensor<S> v;
  };
  TrainConfig cfg_;
  std::vector<State> states_;
  long step_ = 0;
};

// SpecAugment: spec_freq_masks frequency masks of width uniform[0, F] and
// spec_time_masks time masks of width uniform[0, floor(pS * T)], all cells
// set to zero. No time warping. Shape is never changed.
template <typename Rng>
Tensor<float> specaugment(const Tensor<float>& features, const TrainConfig& cfg, Rng& rng) {
  Tensor<float> out = features;
  const std::int64_t t = features.dim(0), d = features.dim(1);
  if (t == 0) return out;
  const int fmax = static_cast<int>(std::min<std::int64_t>(cfg.spec_F, d));
  for (int i = 0; i < cfg.spec_freq_masks; ++i) {
    std::uniform_int_distribution<int> width_dist(0, fmax);
    const int f = width_dist(rng);
    std::uniform_int_distribution<int> start_dist(0, static_cast<int>(d) - f);
    const int f0 = start_dist(rng);
    for (std::int64_t r = 0; r < t; ++r) {
      for (int c = f0; c < f0 + f; ++c) out.at(r, c) = 0.0f;
    }
  }
  const int tmax = static_cast<int>(std::floor(cfg.spec_pS * static_cast<double>(t)));
  for (int i = 0; i < cfg.spec_time_masks; ++i) {
    std::uniform_int_distribution<int> width_dist(0, tmax);
    const int w = width_dist(rng);
    std::uniform_int_distribution<int> start_dist(0, static_cast<int>(t) - w);
    const int t0 = start_dist(rng);
    for (int r = t0; r < t0 + w; ++r) {
      for (std::int64_t c = 0; c < d; ++c) out.at(r, c) = 0.0f;
    }
  }
  return out;
}

// Variational noise: perturb the given weights in place with iid
// Gaussian(0, std^2) draws and hand back the originals so the caller can
// restore them before the optimizer update. std == 0 is a bitwise no-op.
template <typename S, typename Rng>
std::vector<std::pair<Parameter<S>*, Tensor<S>>> apply_variational_noise(
    const std::vector<Parameter<S>*>& params, S noise_std, Rng& rng) {
  std::vector<std::pair<Parameter<S>*, Tensor<S>>> saved;
  if (noise_std < S(0)) throw ConfigError("variational noise: std must be >= 0");
  if (noise_std == S(0)) return saved;
  std::normal_distribution<double> dist(0.0, static_cast<double>(noise_std));
  for (Parameter<S>* p : params) {
    saved.emplace_back(p, p->value);
    for (std::int64_t i = 0; i < p->value.numel(); ++i) {
      p->value[i] += static_cast<S>(dist(rng));
    }
  }
  return saved;
}

template <typename S>
void restore_params(const std::vector<std::pair<Parameter<S>*, Tensor<S>>>& saved) {
  for (const auto& [param, original] : saved) param->value = original;
}

// Token error rate building block.
inline std::int64_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::int64_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<std::int64_t>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

struct TrainMetrics {
  long step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double dev_token_error_rate = 1.0;
};

struct TrainOutcome {
  std::vector<TrainMetrics> log;
  double final_dev_token_error_rate = 1.0;
  long steps_run = 0;
};

}  // namespace contextnet

#endif  // CONTEXTNET_TRAINING_HPP_
