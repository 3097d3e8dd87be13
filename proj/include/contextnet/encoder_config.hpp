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

#ifndef CONTEXTNET_ENCODER_CONFIG_HPP_
#define CONTEXTNET_ENCODER_CONFIG_HPP_

#include <string>
#include <vector>

#include "contextnet/common.hpp"

namespace contextnet {

// Declarative description of one convolution block.
struct BlockSpec {
  int num_layers = 5;    // m
  int out_channels = 0;
  int kernel_size = 5;   // odd
  int stride = 1;        // 1 or 2; a stride-2 block strides only its last layer
  bool residual = true;
  bool se = true;
};

struct EncoderConfig {
  double alpha = 1.0;
  int input_dim = 80;
  std::vector<BlockSpec> blocks;

  void validate() const;
};

enum class Reduction { k2x, k8x };

// Width scaling: nearest multiple of 8, floor of 8.
int round_channels(double raw);

// The 23-block encoder layout: channels 256a x11, 512a x11, 640a x1,
// five conv layers per block except the single-layer first and last blocks
// (which also drop the residual and SE paths), strides at blocks 3, 7 and
// 14 in 8x mode or at block 3 alone in 2x mode.
EncoderConfig default_config(double alpha, int kernel = 5, Reduction reduction = Reduction::k8x);

std::string encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const std::string& text);

}  // namespace contextnet

#endif  // CONTEXTNET_ENCODER_CONFIG_HPP_
