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

#include <random>

#include <nlohmann/json.hpp>

#include "contextnet/analysis.hpp"
#include "contextnet/encoder.hpp"
#include "contextnet/transducer.hpp"

using namespace contextnet;

TEST_CASE("hand-counted single block: 136 parameters") {
  BlockSpec spec{1, 8, 5, 1, false, false};
  CHECK(count_block_params(spec, 8) == 136);  // 5*8+8 dw, 8*8+8 pw, 16 bn
}

TEST_CASE("analytic count equals the instantiated parameter count") {
  std::mt19937_64 rng(3);
  for (double alpha : {0.03125, 0.125}) {
    for (Reduction red : {Reduction::k8x, Reduction::k2x}) {
      EncoderConfig cfg = default_config(alpha, 5, red);
      ParamStore<float> store;
      build_encoder_params(store, cfg, rng);
      CHECK(count_encoder_params(cfg) == store.total_elements(/*trainable_only=*/true));
    }
  }
  // Decoder side as well.
  EncoderConfig cfg = default_config(0.125);
  ParamStore<float> store;
  DecoderDims dims{33, 24, 16};
  build_decoder_params(store, dims.vocab_size, dims.hidden_dim, dims.joint_dim,
                       cfg.blocks.back().out_channels, rng);
  CHECK(count_decoder_params(cfg, dims) == store.total_elements(true));
}

TEST_CASE("width sweep totals sit within 20% of 10.8M / 31.4M / 112.7M") {
  const DecoderDims ref;  // V=1024, H=J=640
  const double want[3] = {10.8e6, 31.4e6, 112.7e6};
  const double alpha[3] = {0.5, 1.0, 2.0};
  for (int i = 0; i < 3; ++i) {
    EncoderConfig cfg = default_config(alpha[i]);
    const double total = static_cast<double>(count_encoder_params(cfg) +
                                             count_decoder_params(cfg, ref));
    CHECK(total > 0.8 * want[i]);
    CHECK(total < 1.2 * want[i]);
  }
  // Frozen expected totals for the reference decoder, from the per-layer
  // formulas traced by hand.
  EncoderConfig one = default_config(1.0);
  CHECK(count_encoder_params(one) == 22611552);
  CHECK(count_decoder_params(one, ref) == 5411584);
}

TEST_CASE("encoder parameter scaling is near-quadratic and monotone in width") {
  const std::int64_t e1 = count_encoder_params(default_config(1.0));
  const std::int64_t e2 = count_encoder_params(default_config(2.0));
  const double ratio = static_cast<double>(e2) / static_cast<double>(e1);
  CHECK(ratio >= 3.6);
  CHECK(ratio <= 4.0);
  std::int64_t prev = 0;
  for (double a : {0.5, 1.0, 1.5, 2.0}) {
    const std::int64_t e = count_encoder_params(default_config(a));
    CHECK(e > prev);
    prev = e;
  }
}

TEST_CASE("flops conventions: hand case, zero audio, exact linearity") {
  CHECK(pointwise_ma_flops(100.0, 256, 256) == 13107200.0);
  CHECK(depthwise_ma_flops(50.0, 256, 5) == 128000.0);
  EncoderConfig cfg = default_config(1.0);
  CHECK(count_flops(cfg, 0.0) == 0.0);
  const double one = count_flops(cfg, 1.0);
  CHECK(count_flops(cfg, 2.0) == 2.0 * one);
  CHECK(count_flops(cfg, 0.37) == 0.37 * one);
  CHECK(one > 0.5e9);
  CHECK(one < 2.5e9);
}

TEST_CASE("progressive downsampling halves the cost near the published ratio") {
  const double f8 = count_flops(default_config(1.0, 5, Reduction::k8x), 1.0);
  const double f2 = count_flops(default_config(1.0, 5, Reduction::k2x), 1.0);
  const double ratio = f8 / f2;
  const double want = 1.040 / 2.137;
  CHECK(ratio > want * 0.85);
  CHECK(ratio < want * 1.15);
}

TEST_CASE("kernel/reduction grid keeps the published ordering") {
  double prev8 = 0.0, prev2 = 0.0;
  for (int k : {3, 5, 11, 23}) {
    const double f8 = count_flops(default_config(1.0, k, Reduction::k8x), 1.0);
    const double f2 = count_flops(default_config(1.0, k, Reduction::k2x), 1.0);
    CHECK(f8 < f2);       // 8x cheaper than 2x at every kernel
    CHECK(f8 >= prev8);   // nondecreasing in kernel size
    CHECK(f2 >= prev2);
    prev8 = f8;
    prev2 = f2;
  }
}

TEST_CASE("receptive field composition: hand-traced cases") {
  {
    EncoderConfig cfg;
    cfg.input_dim = 4;
    cfg.blocks = {BlockSpec{1, 4, 5, 1, false, false}};
    auto [rf, jump] = receptive_field(cfg);
    CHECK(rf == 5);
    CHECK(jump == 1);
  }
  {
    EncoderConfig cfg;
    cfg.input_dim = 4;
    cfg.blocks = {BlockSpec{1, 4, 5, 1, false, false}, BlockSpec{1, 4, 5, 2, false, false}};
    auto [rf, jump] = receptive_field(cfg);
    CHECK(rf == 9);  // 5 + 4*1, then jump doubles
    CHECK(jump == 2);
  }
  {
    auto [rf, jump] = receptive_field(default_config(1.0));
    CHECK(jump == 8);
    // 1 + 4*(16 layers at jump 1 + 20 at 2 + 35 at 4 + 36 at 8)
    CHECK(rf == 1937);
  }
}

TEST_CASE("receptive field grows with kernel size and depth") {
  std::int64_t prev = 0;
  for (int k : {3, 5, 11, 23}) {
    auto [rf, jump] = receptive_field(default_config(0.5, k));
    CHECK(rf > prev);
    prev = rf;
  }
  EncoderConfig shallow = default_config(1.0);
  shallow.blocks.resize(10);
  CHECK(receptive_field(shallow).first < receptive_field(default_config(1.0)).first);
}

TEST_CASE("gradient-probe oracle confirms the analytic receptive field") {
  // All-positive weights, positive input and SE disabled make every path
  // through the conv stack strictly positive, so the nonzero support of
  // d(output frame)/d(input) is exactly the receptive field window.
  std::mt19937_64 rng(17);
  EncoderConfig cfg = default_config(0.01);  // 8-channel blocks, full depth
  for (BlockSpec& b : cfg.blocks) b.se = false;
  const auto [rf, jump] = receptive_field(cfg);
  REQUIRE(jump == 8);

  ParamStore<double> store;
  EncoderParams<double> enc = build_encoder_params(store, cfg, rng);
  for (const auto& entry : store.entries()) {
    Tensor<double>& v = entry.param->value;
    if (entry.param->name.find("running_var") != std::string::npos) continue;
    if (entry.param->name.find("running_mean") != std::string::npos) continue;
    if (entry.param->name.find("gamma") != std::string::npos) continue;
    if (entry.param->name.find("beta") != std::string::npos) {
      v.fill(0.05);
      continue;
    }
    for (std::int64_t i = 0; i < v.numel(); ++i) v[i] = std::abs(v[i]) * 0.2 + 0.05;
  }

  const std::int64_t t_in = rf + 263;  // room so the probed window never clips
  Tensor<double> x({t_in, 80});
  std::uniform_real_distribution<double> pos(0.1, 1.0);
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = pos(rng);

  Tape<double> tape;
  Value input = tape.leaf(x);
  std::vector<Value> outs = encode_batch(tape, {input}, enc, /*train=*/false);
  const Tensor<double>& out = tape.val(outs[0]);
  const std::int64_t probe_row = out.dim(0) / 2;
  Tensor<double> mask(out.shape());
  for (std::int64_t c = 0; c < out.dim(1); ++c) mask.at(probe_row, c) = 1.0;
  Value loss = tape.sum_all(tape.mul(outs[0], tape.leaf(mask)));
  tape.backward(loss);

  const Tensor<double>& gin = tape.grad(input);
  std::int64_t lo = -1, hi = -1;
  for (std::int64_t i = 0; i < t_in; ++i) {
    bool nonzero = false;
    for (std::int64_t c = 0; c < 80; ++c) {
      if (gin.at(i, c) != 0.0) {
        nonzero = true;
        break;
      }
    }
    if (nonzero) {
      if (lo < 0) lo = i;
      hi = i;
    }
  }
  REQUIRE(lo >= 0);
  CHECK(lo > 0);           // window must not clip, or the width check is void
  CHECK(hi < t_in - 1);
  CHECK(hi - lo + 1 == rf);
}

TEST_CASE("cost report: totals are additive and serialization works") {
  EncoderConfig cfg = default_config(0.5, 5);
  CostReport report = analyze(cfg, DecoderDims{});
  std::int64_t params = 0;
  double flops = 0.0;
  for (const BlockCost& b : report.per_block) {
    params += b.params;
    flops += b.flops;
  }
  CHECK(params == report.encoder_params);
  CHECK(flops == doctest::Approx(report.flops_per_second_audio).epsilon(1e-12));
  CHECK(report.total_params == report.encoder_params + report.decoder_params);
  CHECK(report.per_block.back().output_length_factor == doctest::Approx(0.125).epsilon(1e-12));

  const std::string json_text = cost_report_to_json(report);
  auto j = nlohmann::json::parse(json_text);
  CHECK(j["total_params"].get<std::int64_t>() == report.total_params);
  CHECK(j["per_block"].size() == 23);

  const std::string table = cost_report_table(report);
  CHECK(table.find("total params") != std::string::npos);
  CHECK(table.find("receptive field") != std::string::npos);
}
