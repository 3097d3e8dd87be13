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

// Static cost engine: analytic parameter counts, encoder FLOPS per second
// of audio, and receptive-field composition for any encoder configuration.
// Convention: one multiply-add counts as 2 FLOPS, batch norm and activations
// as 4 ops per element, bias adds as 1; lengths flow through the block stack
// as exact reals so the count is linear in audio duration; the decoder is
// excluded from FLOPS.

#ifndef CONTEXTNET_ANALYSIS_HPP_
#define CONTEXTNET_ANALYSIS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "contextnet/encoder_config.hpp"

namespace contextnet {

struct DecoderDims {
  int vocab_size = 1024;
  int hidden_dim = 640;  // H
  int joint_dim = 640;   // J
};

struct BlockCost {
  int block_id = 0;
  std::int64_t params = 0;
  double flops = 0.0;                // per second of audio
  double output_length_factor = 0.0; // block output length / encoder input length
  std::int64_t receptive_field = 0;  // input frames seen by one output frame, cumulative
};

struct CostReport {
  std::int64_t total_params = 0;
  std::int64_t encoder_params = 0;
  std::int64_t decoder_params = 0;
  double flops_per_second_audio = 0.0;
  std::int64_t receptive_field = 0;
  std::int64_t jump = 0;  // product of strides
  std::vector<BlockCost> per_block;
};

// Parameter formulas per layer kind:
//   depthwise k*D + D, pointwise Din*Dout + Dout, batch norm 2*D,
//   SE D*Db + Db + Db*D + D, projection Din*Dout + Dout + 2*Dout.
std::int64_t count_block_params(const BlockSpec& spec, int in_channels);
std::int64_t count_encoder_params(const EncoderConfig& config);
std::int64_t count_decoder_params(const EncoderConfig& config, const DecoderDims& dims);

// Multiply-add-only components, exposed so tests can pin the convention.
double pointwise_ma_flops(double out_len, std::int64_t din, std::int64_t dout);
double depthwise_ma_flops(double out_len, std::int64_t channels, std::int64_t kernel);

double count_flops(const EncoderConfig& config, double audio_seconds);

// (receptive field, jump) after the full conv stack:
// rf += (k-1)*jump per depthwise layer, then jump *= stride.
std::pair<std::int64_t, std::int64_t> receptive_field(const EncoderConfig& config);

CostReport analyze(const EncoderConfig& config, const DecoderDims& dims);

std::string cost_report_to_json(const CostReport& report);
std::string cost_report_table(const CostReport& report);

}  // namespace contextnet

#endif  // CONTEXTNET_ANALYSIS_HPP_
