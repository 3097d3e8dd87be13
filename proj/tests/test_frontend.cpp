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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "contextnet/frontend.hpp"

using namespace contextnet;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string temp_path(const std::string& name) {
  return std::string("/tmp/contextnet_frontend_") + name;
}

Waveform sine_wave(double freq, double seconds, double amplitude) {
  Waveform w;
  w.sample_rate = 16000;
  const std::size_t n = static_cast<std::size_t>(seconds * 16000);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * kPi * freq * static_cast<double>(i) / 16000.0));
  }
  return w;
}

// Independent mel geometry, matching the documented frontend constants.
double hz_to_mel_ref(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz_ref(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
double mel_center_hz(int filter_index) {
  const double lo = hz_to_mel_ref(125.0), hi = hz_to_mel_ref(7600.0);
  const double delta = (hi - lo) / 81.0;
  return mel_to_hz_ref(lo + (filter_index + 1) * delta);
}

}  // namespace

TEST_CASE("wav round trip: full-scale sine survives PCM16") {
  const std::string path = temp_path("sine.wav");
  Waveform w = sine_wave(440.0, 1.0, 1.0);
  write_wav(path, w);
  Waveform r = load_wav(path);
  CHECK(r.sample_rate == 16000);
  REQUIRE(r.samples.size() == w.samples.size());
  float peak = 0.0f;
  for (float s : r.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak >= 0.999f);
  CHECK(peak <= 1.0f);
  std::remove(path.c_str());
}

TEST_CASE("wav: one second of silence is 16000 zero samples") {
  const std::string path = temp_path("silence.wav");
  Waveform w;
  w.samples.assign(16000, 0.0f);
  write_wav(path, w);
  Waveform r = load_wav(path);
  REQUIRE(r.samples.size() == 16000);
  for (float s : r.samples) CHECK(s == 0.0f);
  std::remove(path.c_str());
}

TEST_CASE("wav rejects stereo, naming the channel count") {
  // Hand-built 2-channel header.
  const std::string path = temp_path("stereo.wav");
  std::string buf;
  auto u16 = [&](std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>(v >> 8));
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  buf += "RIFF";
  u32(36 + 8);
  buf += "WAVEfmt ";
  u32(16);
  u16(1);      // PCM
  u16(2);      // stereo
  u32(16000);
  u32(64000);
  u16(4);
  u16(16);
  buf += "data";
  u32(8);
  u32(0);
  u32(0);
  std::ofstream(path, std::ios::binary).write(buf.data(), static_cast<std::streamsize>(buf.size()));
  CHECK_THROWS_WITH_AS(load_wav(path), doctest::Contains("channel count 2"), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("wav rejects missing chunks with a diagnosis") {
  const std::string path = temp_path("broken.wav");
  std::ofstream(path, std::ios::binary) << "RIFFxxxxWAVE";
  CHECK_THROWS_WITH_AS(load_wav(path), doctest::Contains("fmt"), FormatError);
  std::ofstream(path, std::ios::binary) << "JUNK";
  CHECK_THROWS_AS(load_wav(path), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("frame count: 1 second gives exactly 98 frames") {
  CHECK(num_feature_frames(16000) == 98);
  CHECK(num_feature_frames(399) == 0);
  CHECK(num_feature_frames(400) == 1);
  Waveform w;
  w.samples.assign(16000, 0.0f);
  AcousticFeatures f = log_mel_filterbank(w);
  REQUIRE(f.frames.dim(0) == 98);
  REQUIRE(f.frames.dim(1) == 80);
}

TEST_CASE("frame count roughly doubles with audio length") {
  // With truncation T(N) = floor((N-400)/160)+1, so
  // T(2N) - 2 T(N) = floor(r/80 + 2.5) - 1 for r = (N-400) mod 160,
  // which ranges over {1, 2, 3}.
  for (std::int64_t n = 400; n < 6000; n += 37) {
    const std::int64_t diff = num_feature_frames(2 * n) - 2 * num_feature_frames(n);
    CHECK(diff >= 1);
    CHECK(diff <= 3);
  }
}

TEST_CASE("all-zero audio floors every cell at log(1e-10)") {
  Waveform w;
  w.samples.assign(4000, 0.0f);
  AcousticFeatures f = log_mel_filterbank(w);
  const double floor_val = std::log(1e-10);
  CHECK(floor_val == doctest::Approx(-23.0259).epsilon(1e-4));
  for (std::int64_t i = 0; i < f.frames.numel(); ++i) CHECK(f.frames[i] == floor_val);
}

TEST_CASE("a pure 1 kHz tone peaks in the mel bin nearest 1 kHz") {
  int nearest = 0;
  double best = 1e9;
  for (int j = 0; j < 80; ++j) {
    const double d = std::abs(mel_center_hz(j) - 1000.0);
    if (d < best) {
      best = d;
      nearest = j;
    }
  }
  Waveform w = sine_wave(1000.0, 0.5, 0.5);
  AcousticFeatures f = log_mel_filterbank(w);
  for (std::int64_t t = 0; t < f.frames.dim(0); ++t) {
    int argmax = 0;
    for (int j = 1; j < 80; ++j) {
      if (f.frames.at(t, j) > f.frames.at(t, argmax)) argmax = j;
    }
    CHECK(argmax == nearest);
  }
}

TEST_CASE("feature extraction is deterministic") {
  Waveform w = sine_wave(523.25, 0.3, 0.4);
  AcousticFeatures a = log_mel_filterbank(w);
  AcousticFeatures b = log_mel_filterbank(w);
  REQUIRE(a.frames.numel() == b.frames.numel());
  for (std::int64_t i = 0; i < a.frames.numel(); ++i) CHECK(a.frames[i] == b.frames[i]);
}

TEST_CASE("scaling the waveform shifts unfloored log energies by 2 ln c") {
  Waveform w = sine_wave(700.0, 0.25, 0.3);
  const double floor_val = std::log(1e-10);

  // c = 2 scales the float samples exactly, so the shift is exact up to
  // the final log rounding.
  {
    const double c = 2.0;
    Waveform scaled = w;
    for (float& s : scaled.samples) s = static_cast<float>(s * c);
    AcousticFeatures f1 = log_mel_filterbank(w);
    AcousticFeatures f2 = log_mel_filterbank(scaled);
    const double shift = 2.0 * std::log(c);
    int checked = 0;
    for (std::int64_t i = 0; i < f1.frames.numel(); ++i) {
      if (f1.frames[i] > floor_val + 1e-9 && f2.frames[i] > floor_val + 1e-9) {
        CHECK(std::abs(f2.frames[i] - f1.frames[i] - shift) < 1e-9);
        ++checked;
      }
    }
    CHECK(checked > 100);
  }

  // Generic c rounds every scaled float sample; deep-sidelobe cells are
  // cancellation noise, so check the shift on cells within 40 dB of each
  // frame's peak, where quantization error stays far below 1e-4.
  {
    const double c = 1.8;
    Waveform scaled = w;
    for (float& s : scaled.samples) s = static_cast<float>(s * c);
    AcousticFeatures f1 = log_mel_filterbank(w);
    AcousticFeatures f2 = log_mel_filterbank(scaled);
    const double shift = 2.0 * std::log(c);
    int checked = 0;
    for (std::int64_t t = 0; t < f1.frames.dim(0); ++t) {
      double peak = floor_val;
      for (std::int64_t j = 0; j < 80; ++j) peak = std::max(peak, f1.frames.at(t, j));
      for (std::int64_t j = 0; j < 80; ++j) {
        if (f1.frames.at(t, j) > peak - std::log(1e4)) {
          CHECK(std::abs(f2.frames.at(t, j) - f1.frames.at(t, j) - shift) < 1e-4);
          ++checked;
        }
      }
    }
    CHECK(checked > 50);
  }
}

TEST_CASE("unsupported sample rate is rejected") {
  Waveform w;
  w.sample_rate = 8000;
  w.samples.assign(8000, 0.0f);
  CHECK_THROWS_WITH_AS(log_mel_filterbank(w), doctest::Contains("8000"), FormatError);
}

TEST_CASE("CNFB feature file round trip") {
  const std::string path = temp_path("feat.fb");
  Tensor<float> frames({3, 80});
  for (std::int64_t i = 0; i < frames.numel(); ++i) frames[i] = static_cast<float>(i) * 0.25f - 7.0f;
  write_feature_file(path, frames);
  Tensor<float> back = read_feature_file(path);
  REQUIRE(back.shape() == frames.shape());
  for (std::int64_t i = 0; i < frames.numel(); ++i) CHECK(back[i] == frames[i]);
  // Header check: magic + dims.
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "CNFB");
  std::remove(path.c_str());
}

TEST_CASE("fft matches a direct DFT on a small case") {
  std::vector<double> re(8), im(8, 0.0);
  for (int i = 0; i < 8; ++i) re[static_cast<std::size_t>(i)] = std::sin(0.7 * i) + 0.2 * i;
  std::vector<double> re0 = re;
  fft_inplace(re, im);
  for (int k = 0; k < 8; ++k) {
    double sr = 0.0, si = 0.0;
    for (int n = 0; n < 8; ++n) {
      const double ang = -2.0 * kPi * k * n / 8.0;
      sr += re0[static_cast<std::size_t>(n)] * std::cos(ang);
      si += re0[static_cast<std::size_t>(n)] * std::sin(ang);
    }
    CHECK(re[static_cast<std::size_t>(k)] == doctest::Approx(sr).epsilon(1e-10));
    CHECK(im[static_cast<std::size_t>(k)] == doctest::Approx(si).epsilon(1e-10));
  }
}
