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

#ifndef CONTEXTNET_FRONTEND_HPP_
#define CONTEXTNET_FRONTEND_HPP_

#include <string>
#include <vector>

#include "contextnet/tensor.hpp"

namespace contextnet {

struct Waveform {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// 80-dim log-mel filterbank features at a 10 ms hop. Held in double (the
// extraction precision); the CNFB file format narrows to 32-bit floats.
struct AcousticFeatures {
  Tensor<double> frames;  // [T x 80]
  double frame_shift = 0.010;
  double frame_length = 0.025;

  std::int64_t num_frames() const { return frames.rank() == 2 ? frames.dim(0) : 0; }
};

// Fixed frontend geometry. The paper-level contract is 80 mel channels on a
// 25 ms window with 10 ms hop at 16 kHz; the rest are pinned companion
// choices so that extracted features are stable across builds.
struct FrontendConfig {
  static constexpr int kSampleRate = 16000;
  static constexpr int kWindowSamples = 400;  // 25 ms
  static constexpr int kHopSamples = 160;     // 10 ms
  static constexpr int kFftSize = 512;
  static constexpr int kNumMels = 80;
  static constexpr double kMelLowHz = 125.0;
  static constexpr double kMelHighHz = 7600.0;
  static constexpr double kEnergyFloor = 1e-10;
};

// Number of analysis frames for a waveform of n samples (truncating, no
// end padding): floor((n - window) / hop) + 1, or 0 if n < window.
std::int64_t num_feature_frames(std::int64_t num_samples);

// RIFF/WAVE PCM16 mono reader; samples are scaled by 1/32768.
Waveform load_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

AcousticFeatures log_mel_filterbank(const Waveform& w);

// Binary feature file: magic "CNFB", u32 LE frame count, u32 LE channel
// count, then row-major 32-bit LE floats.
void write_feature_file(const std::string& path, const Tensor<float>& frames);
Tensor<float> read_feature_file(const std::string& path);

// In-place radix-2 complex FFT; n must be a power of two.
void fft_inplace(std::vector<double>& re, std::vector<double>& im);

}  // namespace contextnet

#endif  // CONTEXTNET_FRONTEND_HPP_
