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

#include "contextnet/frontend.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

namespace contextnet {
namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

// Little-endian binary helpers.
void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  bool remaining(std::size_t n) const { return pos + n <= buf.size(); }
  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::string tag() {
    std::string t = buf.substr(pos, 4);
    pos += 4;
    return t;
  }
};

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

// 80 triangular mel filters as dense weights over the 257 magnitude bins.
// Triangles are symmetric in the mel domain, so the filter with the nearest
// center frequency has the largest response to a pure tone.
std::vector<std::array<double, FrontendConfig::kFftSize / 2 + 1>> build_mel_bank() {
  constexpr int kBins = FrontendConfig::kFftSize / 2 + 1;
  const double mel_lo = hz_to_mel(FrontendConfig::kMelLowHz);
  const double mel_hi = hz_to_mel(FrontendConfig::kMelHighHz);
  const int m = FrontendConfig::kNumMels;
  const double delta = (mel_hi - mel_lo) / (m + 1);
  std::vector<std::array<double, kBins>> bank(m);
  for (int j = 0; j < m; ++j) bank[j].fill(0.0);
  for (int k = 0; k < kBins; ++k) {
    const double hz = static_cast<double>(k) * FrontendConfig::kSampleRate / FrontendConfig::kFftSize;
    const double mel = hz_to_mel(hz);
    for (int j = 0; j < m; ++j) {
      const double center = mel_lo + (j + 1) * delta;
      const double w = 1.0 - std::abs(mel - center) / delta;
      if (w > 0.0) bank[j][static_cast<std::size_t>(k)] = w;
    }
  }
  return bank;
}

}  // namespace

std::int64_t num_feature_frames(std::int64_t num_samples) {
  if (num_samples < FrontendConfig::kWindowSamples) return 0;
  return (num_samples - FrontendConfig::kWindowSamples) / FrontendConfig::kHopSamples + 1;
}

Waveform load_wav(const std::string& path) {
  const std::string buf = read_all(path);
  ByteReader r{buf};
  if (!r.remaining(12) || r.tag() != "RIFF") throw FormatError("missing RIFF chunk: " + path);
  r.u32();  // overall size, unchecked
  if (r.tag() != "WAVE") throw FormatError("missing WAVE form type: " + path);

  bool have_fmt = false;
  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::int16_t* pcm = nullptr;
  std::size_t pcm_count = 0;
  bool have_data = false;

  while (r.remaining(8)) {
    const std::string id = r.tag();
    const std::uint32_t size = r.u32();
    if (!r.remaining(size)) throw FormatError("truncated chunk '" + id + "': " + path);
    if (id == "fmt ") {
      if (size < 16) throw FormatError("fmt chunk too small: " + path);
      ByteReader f{buf, r.pos};
      audio_format = f.u16();
      channels = f.u16();
      rate = f.u32();
      f.u32();  // byte rate
      f.u16();  // block align
      bits = f.u16();
      have_fmt = true;
    } else if (id == "data") {
      pcm = reinterpret_cast<const std::int16_t*>(buf.data() + r.pos);
      pcm_count = size / 2;
      have_data = true;
    }
    r.pos += size + (size % 2);  // chunks are word aligned
  }
  if (!have_fmt) throw FormatError("missing fmt chunk: " + path);
  if (!have_data) throw FormatError("missing data chunk: " + path);
  if (audio_format != 1) {
    throw FormatError("unsupported audio format " + std::to_string(audio_format) +
                      " (PCM required): " + path);
  }
  if (channels != 1) {
    throw FormatError("unsupported channel count " + std::to_string(channels) +
                      " (mono required): " + path);
  }
  if (bits != 16) {
    throw FormatError("unsupported bit depth " + std::to_string(bits) +
                      " (16-bit required): " + path);
  }

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(pcm_count);
  for (std::size_t i = 0; i < pcm_count; ++i) {
    std::int16_t s;
    std::memcpy(&s, pcm + i, 2);  // buffer may be unaligned
    w.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (float s : w.samples) {
    double v = std::lround(static_cast<double>(s) * 32767.0);
    if (v > 32767.0) v = 32767.0;
    if (v < -32768.0) v = -32768.0;
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
    throw UsageError("fft: size must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::size_t a = i + j, b = i + j + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

AcousticFeatures log_mel_filterbank(const Waveform& w) {
  if (w.sample_rate != FrontendConfig::kSampleRate) {
    throw FormatError("unsupported sample rate " + std::to_string(w.sample_rate) +
                      " Hz (16000 required, resampling not supported)");
  }
  static const auto mel_bank = build_mel_bank();
  static const auto hann = [] {
    std::array<double, FrontendConfig::kWindowSamples> win;
    for (int n = 0; n < FrontendConfig::kWindowSamples; ++n) {
      win[static_cast<std::size_t>(n)] =
          0.5 - 0.5 * std::cos(2.0 * kPi * n / FrontendConfig::kWindowSamples);
    }
    return win;
  }();

  const std::int64_t t = num_feature_frames(static_cast<std::int64_t>(w.samples.size()));
  AcousticFeatures feat;
  feat.frames = Tensor<double>({t, FrontendConfig::kNumMels});

  constexpr int kBins = FrontendConfig::kFftSize / 2 + 1;
  std::vector<double> re(FrontendConfig::kFftSize), im(FrontendConfig::kFftSize);
  std::vector<double> power(kBins);
  for (std::int64_t fidx = 0; fidx < t; ++fidx) {
    const std::int64_t off = fidx * FrontendConfig::kHopSamples;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int n = 0; n < FrontendConfig::kWindowSamples; ++n) {
      re[static_cast<std::size_t>(n)] =
          static_cast<double>(w.samples[static_cast<std::size_t>(off + n)]) *
          hann[static_cast<std::size_t>(n)];
    }
    fft_inplace(re, im);
    for (int k = 0; k < kBins; ++k) {
      power[static_cast<std::size_t>(k)] =
          re[static_cast<std::size_t>(k)] * re[static_cast<std::size_t>(k)] +
          im[static_cast<std::size_t>(k)] * im[static_cast<std::size_t>(k)];
    }
    for (int j = 0; j < FrontendConfig::kNumMels; ++j) {
      double acc = 0.0;
      const auto& wrow = mel_bank[static_cast<std::size_t>(j)];
      for (int k = 0; k < kBins; ++k) acc += wrow[static_cast<std::size_t>(k)] * power[static_cast<std::size_t>(k)];
      feat.frames.at(fidx, j) = std::log(std::max(acc, FrontendConfig::kEnergyFloor));
    }
  }
  return feat;
}

void write_feature_file(const std::string& path, const Tensor<float>& frames) {
  if (frames.rank() != 2) throw UsageError("feature file: expected a 2D tensor");
  std::string out;
  out += "CNFB";
  put_u32(out, static_cast<std::uint32_t>(frames.dim(0)));
  put_u32(out, static_cast<std::uint32_t>(frames.dim(1)));
  for (std::int64_t i = 0; i < frames.numel(); ++i) {
    std::uint32_t bits;
    const float v = frames[i];
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Tensor<float> read_feature_file(const std::string& path) {
  const std::string buf = read_all(path);
  ByteReader r{buf};
  if (!r.remaining(12) || r.tag() != "CNFB") throw FormatError("missing CNFB magic: " + path);
  const std::int64_t rows = r.u32();
  const std::int64_t cols = r.u32();
  if (!r.remaining(static_cast<std::size_t>(rows * cols) * 4)) {
    throw FormatError("truncated feature data: " + path);
  }
  Tensor<float> out({rows, cols});
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const std::uint32_t bits = r.u32();
    float v;
    std::memcpy(&v, &bits, 4);
    out[i] = v;
  }
  return out;
}

}  // namespace contextnet
