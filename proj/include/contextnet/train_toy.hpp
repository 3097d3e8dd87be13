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

#ifndef CONTEXTNET_TRAIN_TOY_HPP_
#define CONTEXTNET_TRAIN_TOY_HPP_

#include <string>
#include <vector>

#include "contextnet/encoder.hpp"
#include "contextnet/threading.hpp"
#include "contextnet/toytask.hpp"
#include "contextnet/training.hpp"
#include "contextnet/transducer.hpp"

namespace contextnet {

template <typename S>
struct ToyModel {
  EncoderParams<S> encoder;
  DecoderParams<S> decoder;
  Vocab vocab;
};

template <typename S>
ToyModel<S> build_toy_model(ParamStore<S>& store, const ToyModelConfig& mcfg,
                            const ToyTaskSpec& task, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x11));
  ToyModel<S> model;
  model.vocab = toy_vocab(task.num_tones);
  const EncoderConfig cfg = toy_encoder_config(mcfg.alpha);
  model.encoder = build_encoder_params(store, cfg, rng);
  model.decoder = build_decoder_params(store, model.vocab.size(), mcfg.hidden_dim,
                                       mcfg.joint_dim, model.encoder.output_dim(), rng);
  return model;
}

// Dev-set token error rate under greedy decode with inference statistics.
template <typename S>
double evaluate_token_error(const std::vector<ToyExample>& dev, const ToyModel<S>& model) {
  std::vector<std::int64_t> errors(dev.size()), tokens(dev.size());
  parallel_for(static_cast<std::int64_t>(dev.size()), [&](std::int64_t i) {
    const ToyExample& ex = dev[static_cast<std::size_t>(i)];
    const Tensor<S> feats = ex.features.template cast<S>();
    const Tensor<S> enc = encode(feats, model.encoder);
    const std::vector<int> hyp = greedy_decode(enc, model.decoder);
    errors[static_cast<std::size_t>(i)] = edit_distance(hyp, ex.labels);
    tokens[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(ex.labels.size());
  });
  std::int64_t err_total = 0, tok_total = 0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    err_total += errors[i];
    tok_total += tokens[i];
  }
  return tok_total == 0 ? 0.0 : static_cast<double>(err_total) / static_cast<double>(tok_total);
}

// One optimization step over a batch of examples; returns the mean loss.
template <typename S>
double train_step(const std::vector<const ToyExample*>& batch, ToyModel<S>& model,
                  AdamOptimizer<S>& opt, const TrainConfig& cfg, long step) {
  Tape<S> tape;

  // SpecAugment with a per-(step, slot) stream.
  std::vector<Value> feats;
  feats.reserve(batch.size());
  for (std::size_t slot = 0; slot < batch.size(); ++slot) {
    Tensor<float> masked = batch[slot]->features;
    if (cfg.spec_F > 0 || cfg.spec_time_masks > 0) {
      std::mt19937_64 rng(mix_seed(cfg.seed, 0x400000ULL + static_cast<std::uint64_t>(step) * 64 +
                                                 static_cast<std::uint64_t>(slot)));
      masked = specaugment(masked, cfg, rng);
    }
    feats.push_back(tape.leaf(masked.template cast<S>()));
  }

  // Variational noise on the decoder for this step's forward/backward; the
  // optimizer sees gradients at the noisy point but updates clean weights.
  std::vector<std::pair<Parameter<S>*, Tensor<S>>> saved;
  if (cfg.vn_std > 0.0 && step > cfg.vn_delay_steps) {
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x500000ULL + static_cast<std::uint64_t>(step)));
    saved = apply_variational_noise(model.decoder.all(), static_cast<S>(cfg.vn_std), rng);
  }

  std::vector<Value> enc_outs = encode_batch(tape, feats, model.encoder, /*train=*/true);
  Value total{};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Value loss = transducer_loss(tape, enc_outs[i], batch[i]->labels, model.decoder);
    total = i == 0 ? loss : tape.add(total, loss);
  }
  Value mean_loss = tape.scale(total, S(1) / static_cast<S>(batch.size()));
  const double loss_value = static_cast<double>(tape.val(mean_loss)[0]);
  if (!std::isfinite(loss_value)) {
    restore_params(saved);
    throw NumericError("training diverged (non-finite loss) at step " + std::to_string(step));
  }
  tape.backward(mean_loss);
  restore_params(saved);
  opt.step(tape, lr_schedule(step, cfg));
  return loss_value;
}

template <typename S>
TrainOutcome train_toy(const ToyTaskSpec& task, const ToyModelConfig& mcfg,
                       const TrainConfig& cfg, ParamStore<S>& store, ToyModel<S>* model_out) {
  task.validate();
  cfg.validate();
  ToyModel<S> model = build_toy_model(store, mcfg, task, cfg.seed);

  const auto train_set = build_toy_dataset(task, task.train_utterances, cfg.seed, 0x100000);
  const auto dev_set = build_toy_dataset(task, task.dev_utterances, cfg.seed, 0x200000);

  AdamOptimizer<S> opt(store, cfg);
  TrainOutcome outcome;
  for (long step = 1; step <= cfg.max_steps; ++step) {
    std::mt19937_64 batch_rng(mix_seed(cfg.seed, 0x300000ULL + static_cast<std::uint64_t>(step)));
    std::uniform_int_distribution<int> pick(0, task.train_utterances - 1);
    std::vector<const ToyExample*> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      batch.push_back(&train_set[static_cast<std::size_t>(pick(batch_rng))]);
    }
    const double loss = train_step(batch, model, opt, cfg, step);
    outcome.steps_run = step;

    if (step % cfg.eval_interval == 0 || step == cfg.max_steps) {
      TrainMetrics m;
      m.step = step;
      m.lr = lr_schedule(step, cfg);
      m.train_loss = loss;
      m.dev_token_error_rate = evaluate_token_error(dev_set, model);
      outcome.log.push_back(m);
      outcome.final_dev_token_error_rate = m.dev_token_error_rate;
      if (cfg.stop_token_error >= 0.0 && m.dev_token_error_rate <= cfg.stop_token_error) break;
    }
  }
  if (model_out != nullptr) *model_out = model;
  return outcome;
}

}  // namespace contextnet

#endif  // CONTEXTNET_TRAIN_TOY_HPP_
