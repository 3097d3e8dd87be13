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

#include "contextnet/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace contextnet {
namespace {

constexpr double kFramesPerSecond = 100.0;  // 10 ms hop

std::int64_t se_bottleneck(std::int64_t d) {
  const std::int64_t db = d / 8;
  return db < 1 ? 1 : db;
}

struct BlockFlops {
  double flops = 0.0;
  double out_len = 0.0;
};

// FLOPS of one block at (real) input length, per the module convention.
BlockFlops block_flops(const BlockSpec& spec, std::int64_t din, double len_in) {
  BlockFlops r;
  const std::int64_t dout = spec.out_channels;
  const std::int64_t k = spec.kernel_size;
  double len = len_in;
  for (int li = 0; li < spec.num_layers; ++li) {
    const std::int64_t cin = li == 0 ? din : dout;
    const int stride = li == spec.num_layers - 1 ? spec.stride : 1;
    len /= stride;
    r.flops += 2.0 * static_cast<double>(k * cin) * len;       // depthwise MAs
    r.flops += static_cast<double>(cin) * len;                 // depthwise bias
    r.flops += 2.0 * static_cast<double>(cin * dout) * len;    // pointwise MAs
    r.flops += static_cast<double>(dout) * len;                // pointwise bias
    r.flops += 4.0 * static_cast<double>(dout) * len;          // batch norm
    r.flops += 4.0 * static_cast<double>(dout) * len;          // activation
  }
  r.out_len = len;
  if (spec.residual) {
    if (spec.se) {
      const std::int64_t db = se_bottleneck(dout);
      r.flops += static_cast<double>(dout) * len + static_cast<double>(dout);  // pooling
      r.flops += 2.0 * static_cast<double>(dout * db) + static_cast<double>(db);  // fc1
      r.flops += 4.0 * static_cast<double>(db);                                   // bottleneck act
      r.flops += 2.0 * static_cast<double>(db * dout) + static_cast<double>(dout);  // fc2
      r.flops += 4.0 * static_cast<double>(dout);                                  // sigmoid
      r.flops += static_cast<double>(dout) * len;                                  // gating
    }
    r.flops += 2.0 * static_cast<double>(din * dout) * len;  // projection MAs
    r.flops += static_cast<double>(dout) * len;              // projection bias
    r.flops += 4.0 * static_cast<double>(dout) * len;        // projection batch norm
    r.flops += static_cast<double>(dout) * len;              // residual add
    r.flops += 4.0 * static_cast<double>(dout) * len;        // final activation
  }
  return r;
}

}  // namespace

std::int64_t count_block_params(const BlockSpec& spec, int in_channels) {
  const std::int64_t dout = spec.out_channels;
  const std::int64_t k = spec.kernel_size;
  std::int64_t params = 0;
  for (int li = 0; li < spec.num_layers; ++li) {
    const std::int64_t cin = li == 0 ? in_channels : dout;
    params += k * cin + cin;        // depthwise + bias
    params += cin * dout + dout;    // pointwise + bias
    params += 2 * dout;             // batch norm gamma, beta
  }
  if (spec.se) {
    const std::int64_t db = se_bottleneck(dout);
    params += dout * db + db + db * dout + dout;
  }
  if (spec.residual) {
    params += static_cast<std::int64_t>(in_channels) * dout + dout + 2 * dout;
  }
  return params;
}

std::int64_t count_encoder_params(const EncoderConfig& config) {
  config.validate();
  std::int64_t total = 0;
  int din = config.input_dim;
  for (const BlockSpec& b : config.blocks) {
    total += count_block_params(b, din);
    din = b.out_channels;
  }
  return total;
}

std::int64_t count_decoder_params(const EncoderConfig& config, const DecoderDims& dims) {
  const std::int64_t v = dims.vocab_size, h = dims.hidden_dim, j = dims.joint_dim;
  const std::int64_t denc = config.blocks.back().out_channels;
  constexpr std::int64_t kEmb = 640;
  std::int64_t total = 0;
  total += v * kEmb;             // token embedding
  total += kEmb;                 // start embedding
  total += kEmb * 4 * h + h * 4 * h + 4 * h;  // LSTM
  total += denc * j + h * j + j; // joint input projections + bias
  total += j * v + v;            // output projection + bias
  return total;
}

double pointwise_ma_flops(double out_len, std::int64_t din, std::int64_t dout) {
  return 2.0 * static_cast<double>(din * dout) * out_len;
}

double depthwise_ma_flops(double out_len, std::int64_t channels, std::int64_t kernel) {
  return 2.0 * static_cast<double>(kernel * channels) * out_len;
}

double count_flops(const EncoderConfig& config, double audio_seconds) {
  if (audio_seconds < 0.0) throw ConfigError("count_flops: audio_seconds must be >= 0");
  config.validate();
  double per_second = 0.0;
  double len = kFramesPerSecond;
  int din = config.input_dim;
  for (const BlockSpec& b : config.blocks) {
    const BlockFlops bf = block_flops(b, din, len);
    per_second += bf.flops;
    len = bf.out_len;
    din = b.out_channels;
  }
  return per_second * audio_seconds;
}

std::pair<std::int64_t, std::int64_t> receptive_field(const EncoderConfig& config) {
  config.validate();
  std::int64_t rf = 1, jump = 1;
  for (const BlockSpec& b : config.blocks) {
    for (int li = 0; li < b.num_layers; ++li) {
      rf += static_cast<std::int64_t>(b.kernel_size - 1) * jump;
      if (li == b.num_layers - 1) jump *= b.stride;
    }
  }
  return {rf, jump};
}

CostReport analyze(const EncoderConfig& config, const DecoderDims& dims) {
  config.validate();
  CostReport report;
  double len = kFramesPerSecond;
  std::int64_t rf = 1, jump = 1;
  int din = config.input_dim;
  for (std::size_t bi = 0; bi < config.blocks.size(); ++bi) {
    const BlockSpec& b = config.blocks[bi];
    BlockCost cost;
    cost.block_id = static_cast<int>(bi);
    cost.params = count_block_params(b, din);
    const BlockFlops bf = block_flops(b, din, len);
    cost.flops = bf.flops;
    len = bf.out_len;
    cost.output_length_factor = len / kFramesPerSecond;
    for (int li = 0; li < b.num_layers; ++li) {
      rf += static_cast<std::int64_t>(b.kernel_size - 1) * jump;
      if (li == b.num_layers - 1) jump *= b.stride;
    }
    cost.receptive_field = rf;
    report.per_block.push_back(cost);
    report.encoder_params += cost.params;
    report.flops_per_second_audio += cost.flops;
    din = b.out_channels;
  }
  report.decoder_params = count_decoder_params(config, dims);
  report.total_params = report.encoder_params + report.decoder_params;
  report.receptive_field = rf;
  report.jump = jump;
  return report;
}

std::string cost_report_to_json(const CostReport& report) {
  nlohmann::json j;
  j["total_params"] = report.total_params;
  j["encoder_params"] = report.encoder_params;
  j["decoder_params"] = report.decoder_params;
  j["flops_per_second_audio"] = report.flops_per_second_audio;
  j["receptive_field"] = report.receptive_field;
  j["jump"] = report.jump;
  j["per_block"] = nlohmann::json::array();
  for (const BlockCost& b : report.per_block) {
    j["per_block"].push_back({{"block_id", b.block_id},
                              {"params", b.params},
                              {"flops", b.flops},
                              {"output_length_factor", b.output_length_factor},
                              {"receptive_field", b.receptive_field}});
  }
  return j.dump(2);
}

std::string cost_report_table(const CostReport& report) {
  std::ostringstream os;
  os << std::left;
  os << std::setw(7) << "block" << std::setw(14) << "params" << std::setw(16) << "flops/s"
     << std::setw(12) << "out_len" << std::setw(10) << "rf" << "\n";
  for (const BlockCost& b : report.per_block) {
    os << std::setw(7) << b.block_id << std::setw(14) << b.params << std::setw(16)
       << std::scientific << std::setprecision(3) << b.flops << std::defaultfloat
       << std::setw(12) << std::setprecision(5) << b.output_length_factor << std::setw(10)
       << b.receptive_field << "\n";
  }
  os << "\n";
  os << "encoder params: " << report.encoder_params << "\n";
  os << "decoder params: " << report.decoder_params << "\n";
  os << "total params:   " << report.total_params << "\n";
  os << "encoder GFLOPS per second of audio: " << std::fixed << std::setprecision(3)
     << report.flops_per_second_audio / 1e9 << "\n";
  os << "receptive field: " << report.receptive_field << " frames (jump " << report.jump
     << ")\n";
  return os.str();
}

}  // namespace contextnet
