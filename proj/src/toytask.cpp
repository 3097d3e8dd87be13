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

#include "contextnet/toytask.hpp"

#include <cmath>
#include <random>

#include "contextnet/threading.hpp"

namespace contextnet {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kToneAmplitude = 0.25;
constexpr double kRampSeconds = 0.005;

}  // namespace

void ToyTaskSpec::validate() const {
  if (num_tones < 1) throw ConfigError("toy task: num_tones must be >= 1");
  if (tone_length <= 0.0) throw ConfigError("toy task: tone_length must be positive");
  if (min_tokens < 1 || max_tokens < min_tokens) {
    throw ConfigError("toy task: token range must satisfy 1 <= min <= max");
  }
  if (train_utterances < 1 || dev_utterances < 1) {
    throw ConfigError("toy task: utterance counts must be >= 1");
  }
  toy_tone_frequencies(num_tones);  // throws if a tone would exceed the mel range
}

std::vector<double> toy_tone_frequencies(int num_tones) {
  std::vector<double> freqs;
  for (int i = 0; i < num_tones; ++i) {
    const double f = 400.0 * std::pow(2.0, 0.5 * i);
    if (f >= FrontendConfig::kMelHighHz) {
      throw ConfigError("toy task: tone " + std::to_string(i) + " at " + std::to_string(f) +
                        " Hz exceeds the mel range");
    }
    freqs.push_back(f);
  }
  return freqs;
}

Vocab toy_vocab(int num_tones) {
  Vocab v;
  v.tokens.push_back(Vocab::kBlankSymbol);
  for (int i = 0; i < num_tones; ++i) v.tokens.push_back("tone" + std::to_string(i));
  v.validate();
  return v;
}

Waveform synth_tone_utterance(const ToyTaskSpec& task, const std::vector<int>& tone_ids,
                              std::uint64_t seed) {
  const std::vector<double> freqs = toy_tone_frequencies(task.num_tones);
  const int rate = FrontendConfig::kSampleRate;
  const std::size_t seg = static_cast<std::size_t>(std::llround(task.tone_length * rate));
  const std::size_t ramp = static_cast<std::size_t>(std::llround(kRampSeconds * rate));

  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(seg * tone_ids.size(), 0.0f);
  std::size_t off = 0;
  for (int id : tone_ids) {
    const double f = freqs[static_cast<std::size_t>(id)];
    for (std::size_t n = 0; n < seg; ++n) {
      double env = 1.0;
      if (n < ramp) env = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(n) / ramp);
      if (seg - n <= ramp) env = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(seg - n) / ramp);
      w.samples[off + n] = static_cast<float>(
          kToneAmplitude * env * std::sin(2.0 * kPi * f * static_cast<double>(n) / rate));
    }
    off += seg;
  }

  // Additive white noise at the requested SNR against the tone RMS.
  const double rms = kToneAmplitude / std::sqrt(2.0);
  const double noise_std = rms * std::pow(10.0, -task.snr_db / 20.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_std);
  for (float& s : w.samples) {
    double v = static_cast<double>(s) + noise(rng);
    if (v > 1.0) v = 1.0;
    if (v < -1.0) v = -1.0;
    s = static_cast<float>(v);
  }
  return w;
}

std::vector<ToyExample> build_toy_dataset(const ToyTaskSpec& task, int count,
                                          std::uint64_t seed, std::uint64_t stream_tag) {
  task.validate();
  std::vector<ToyExample> out(static_cast<std::size_t>(count));
  parallel_for(count, [&](std::int64_t i) {
    const std::uint64_t utt_seed = mix_seed(seed, stream_tag + static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(utt_seed);
    std::uniform_int_distribution<int> len_dist(task.min_tokens, task.max_tokens);
    std::uniform_int_distribution<int> tone_dist(0, task.num_tones - 1);
    const int n = len_dist(rng);
    std::vector<int> tones;
    tones.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) tones.push_back(tone_dist(rng));
    const Waveform w = synth_tone_utterance(task, tones, mix_seed(utt_seed, 0x5A5A));
    ToyExample& ex = out[static_cast<std::size_t>(i)];
    ex.features = log_mel_filterbank(w).frames.cast<float>();
    for (int tone : tones) ex.labels.push_back(tone + 1);  // vocab id, blank at 0
  });
  return out;
}

EncoderConfig toy_encoder_config(double alpha) {
  EncoderConfig cfg;
  cfg.alpha = alpha;
  cfg.input_dim = 80;
  const int c256 = round_channels(256.0 * alpha);
  const int c512 = round_channels(512.0 * alpha);
  const int c640 = round_channels(640.0 * alpha);
  cfg.blocks = {
      BlockSpec{1, c256, 5, 1, false, false},
      BlockSpec{5, c256, 5, 1, true, true},
      BlockSpec{5, c256, 5, 2, true, true},
      BlockSpec{5, c512, 5, 2, true, true},
      BlockSpec{1, c640, 5, 1, false, false},
  };
  cfg.validate();
  return cfg;
}

}  // namespace contextnet
