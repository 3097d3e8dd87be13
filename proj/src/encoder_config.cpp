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

#include "contextnet/encoder_config.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace contextnet {

void EncoderConfig::validate() const {
  if (alpha <= 0.0) throw ConfigError("encoder config: alpha must be positive");
  if (input_dim < 1) throw ConfigError("encoder config: input_dim must be >= 1");
  if (blocks.empty()) throw ConfigError("encoder config: no blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& b = blocks[i];
    const std::string where = "block " + std::to_string(i);
    if (b.num_layers < 1) throw ConfigError(where + ": num_layers must be >= 1");
    if (b.out_channels < 1) throw ConfigError(where + ": out_channels must be >= 1");
    if (b.kernel_size < 1 || b.kernel_size % 2 == 0) {
      throw ConfigError(where + ": kernel_size must be odd, got " + std::to_string(b.kernel_size));
    }
    if (b.stride != 1 && b.stride != 2) {
      throw ConfigError(where + ": stride must be 1 or 2, got " + std::to_string(b.stride));
    }
  }
}

int round_channels(double raw) {
  const long long rounded = std::llround(raw / 8.0) * 8;
  return static_cast<int>(rounded < 8 ? 8 : rounded);
}

EncoderConfig default_config(double alpha, int kernel, Reduction reduction) {
  if (alpha <= 0.0) throw ConfigError("default_config: alpha must be positive");
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("default_config: kernel size must be odd, got " + std::to_string(kernel));
  }
  const int c256 = round_channels(256.0 * alpha);
  const int c512 = round_channels(512.0 * alpha);
  const int c640 = round_channels(640.0 * alpha);

  EncoderConfig cfg;
  cfg.alpha = alpha;
  cfg.input_dim = 80;
  cfg.blocks.resize(23);
  for (int i = 0; i < 23; ++i) {
    BlockSpec& b = cfg.blocks[static_cast<std::size_t>(i)];
    b.kernel_size = kernel;
    b.num_layers = (i == 0 || i == 22) ? 1 : 5;
    b.residual = !(i == 0 || i == 22);
    b.se = b.residual;
    b.out_channels = i <= 10 ? c256 : (i <= 21 ? c512 : c640);
    b.stride = 1;
  }
  cfg.blocks[3].stride = 2;
  if (reduction == Reduction::k8x) {
    cfg.blocks[7].stride = 2;
    cfg.blocks[14].stride = 2;
  }
  cfg.validate();
  return cfg;
}

std::string encoder_config_to_json(const EncoderConfig& config) {
  nlohmann::json j;
  j["alpha"] = config.alpha;
  j["input_dim"] = config.input_dim;
  j["blocks"] = nlohmann::json::array();
  for (const BlockSpec& b : config.blocks) {
    j["blocks"].push_back({{"num_layers", b.num_layers},
                           {"out_channels", b.out_channels},
                           {"kernel_size", b.kernel_size},
                           {"stride", b.stride},
                           {"residual", b.residual},
                           {"se", b.se}});
  }
  return j.dump(2);
}

EncoderConfig encoder_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("encoder config: invalid JSON: ") + e.what());
  }
  EncoderConfig cfg;
  try {
    cfg.alpha = j.at("alpha").get<double>();
    cfg.input_dim = j.at("input_dim").get<int>();
    for (const auto& jb : j.at("blocks")) {
      BlockSpec b;
      b.num_layers = jb.at("num_layers").get<int>();
      b.out_channels = jb.at("out_channels").get<int>();
      b.kernel_size = jb.at("kernel_size").get<int>();
      b.stride = jb.at("stride").get<int>();
      b.residual = jb.at("residual").get<bool>();
      b.se = jb.at("se").get<bool>();
      cfg.blocks.push_back(b);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("encoder config: missing or mistyped field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace contextnet
