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

// Synthetic tone-sequence recognition task: each utterance is a sequence of
// 1-6 pure-tone segments in noise; the target transcript is the sequence of
// tone identities. A desk-scale stand-in that exercises the full pipeline
// (frontend, encoder, transducer loss, optimizer, decode) end to end.

#ifndef CONTEXTNET_TOYTASK_HPP_
#define CONTEXTNET_TOYTASK_HPP_

#include <vector>

#include "contextnet/encoder_config.hpp"
#include "contextnet/frontend.hpp"
#include "contextnet/transducer.hpp"

namespace contextnet {

struct ToyTaskSpec {
  int num_tones = 8;
  double tone_length = 0.14;  // seconds per token
  int min_tokens = 1;
  int max_tokens = 6;
  double snr_db = 20.0;
  int train_utterances = 2000;
  int dev_utterances = 200;

  void validate() const;
};

struct ToyExample {
  std::vector<int> labels;  // vocabulary ids, blank excluded
  Tensor<float> features;   // [T x 80]
};

// Log-spaced tone frequencies, distinct and below the 7.6 kHz mel ceiling.
std::vector<double> toy_tone_frequencies(int num_tones);

Vocab toy_vocab(int num_tones);

Waveform synth_tone_utterance(const ToyTaskSpec& task, const std::vector<int>& tone_ids,
                              std::uint64_t seed);

// Deterministic dataset: utterance i depends only on (seed, stream_tag, i).
std::vector<ToyExample> build_toy_dataset(const ToyTaskSpec& task, int count,
                                          std::uint64_t seed, std::uint64_t stream_tag);

// Five-block reduction of the encoder layout (4x temporal downsampling)
// used for desk-scale training.
EncoderConfig toy_encoder_config(double alpha);

struct ToyModelConfig {
  double alpha = 0.125;
  int hidden_dim = 64;
  int joint_dim = 64;
};

}  // namespace contextnet

#endif  // CONTEXTNET_TOYTASK_HPP_
