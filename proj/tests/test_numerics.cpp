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

#include "contextnet/kernels.hpp"
#include "contextnet/tape.hpp"
#include "gradcheck.hpp"

using namespace contextnet;
using contextnet::testing::max_grad_rel_err;

namespace {

Tensor<double> delta_kernel(std::int64_t k, std::int64_t d) {
  Tensor<double> kernel({k, d});
  for (std::int64_t c = 0; c < d; ++c) kernel.at((k - 1) / 2, c) = 1.0;
  return kernel;
}

}  // namespace

TEST_CASE("tensor shape and data length stay consistent") {
  Tensor<float> t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.dtype() == Dtype::kFloat32);
  CHECK(Tensor<double>({4}).dtype() == Dtype::kFloat64);
  CHECK_THROWS_AS(Tensor<float>({2, 2}, {1.0f, 2.0f}), ConfigError);
}

TEST_CASE("depthwise conv with a delta kernel is the identity") {
  std::mt19937_64 rng(7);
  for (std::int64_t k : {3, 5, 11}) {
    for (int trial = 0; trial < 5; ++trial) {
      Tensor<double> x = random_normal<double>({9, 4}, 1.0, rng);
      Tensor<double> y = kernels::conv1d_depthwise(x, delta_kernel(k, 4), 1);
      REQUIRE(y.same_shape(x));
      for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
    }
  }
}

TEST_CASE("depthwise conv hand case: all-ones kernel over a ramp") {
  Tensor<double> x({4, 1}, {1, 2, 3, 4});
  Tensor<double> kernel({3, 1}, {1, 1, 1});
  Tensor<double> y = kernels::conv1d_depthwise(x, kernel, 1);
  REQUIRE(y.dim(0) == 4);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 6.0);
  CHECK(y[2] == 9.0);
  CHECK(y[3] == 7.0);
}

TEST_CASE("depthwise conv output length is ceil(T/stride)") {
  std::mt19937_64 rng(3);
  for (std::int64_t t = 1; t <= 64; ++t) {
    for (std::int64_t stride : {1, 2}) {
      for (std::int64_t k : {3, 5, 11, 23}) {
        Tensor<double> x = random_normal<double>({t, 2}, 1.0, rng);
        Tensor<double> kernel = random_normal<double>({k, 2}, 1.0, rng);
        Tensor<double> y = kernels::conv1d_depthwise(x, kernel, stride);
        CHECK(y.dim(0) == (t + stride - 1) / stride);
        CHECK(y.all_finite());
      }
    }
  }
}

TEST_CASE("depthwise conv rejects bad configs") {
  Tensor<double> x({4, 2});
  CHECK_THROWS_AS(kernels::conv1d_depthwise(x, Tensor<double>({3, 3}), 1), ConfigError);
  CHECK_THROWS_AS(kernels::conv1d_depthwise(x, Tensor<double>({4, 2}), 1), ConfigError);
  CHECK_THROWS_AS(kernels::conv1d_depthwise(x, Tensor<double>({3, 2}), 0), ConfigError);
}

TEST_CASE("pointwise map: hand case and identity") {
  // [T x Din] x [Din x Dout] + bias
  Tensor<double> x({2, 2}, {1, 2, 3, 4});
  Tensor<double> w({2, 1}, {1, 1});
  Tensor<double> b({1}, {0.5});
  Tensor<double> y = kernels::row_bias_add(kernels::matmul(x, w), b);
  CHECK(y.at(0, 0) == 3.5);
  CHECK(y.at(1, 0) == 7.5);

  Tensor<double> eye = Tensor<double>::eye(2);
  Tensor<double> zero({2});
  Tensor<double> same = kernels::row_bias_add(kernels::matmul(x, eye), zero);
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(same[i] == x[i]);
}

TEST_CASE("swish values, stability and definition") {
  CHECK(swish_scalar(0.0) == 0.0);
  CHECK(swish_scalar(1.0) == doctest::Approx(0.7310586).epsilon(1e-6));
  const double far_neg = swish_scalar(-30.0);
  CHECK(std::isfinite(far_neg));
  CHECK(far_neg == doctest::Approx(-2.8e-12).epsilon(0.05));
  const double far_pos = swish_scalar(500.0);
  CHECK(std::isfinite(far_pos));
  CHECK(far_pos == doctest::Approx(500.0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const double x = dist(rng);
    CHECK(swish_scalar(x) == x * stable_sigmoid(x));  // exact, same expression tree
  }
  // Monotone for x >= 1.28.
  double prev = swish_scalar(1.28);
  for (double x = 1.29; x < 12.0; x += 0.01) {
    const double cur = swish_scalar(x);
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("batch norm train mode matches the batch-statistics formula") {
  Tape<double> tape;
  Value x = tape.leaf(Tensor<double>({2, 1}, {1.0, 3.0}));
  Value gamma = tape.leaf(Tensor<double>::full({1}, 1.0));
  Value beta = tape.leaf(Tensor<double>({1}));
  const double eps = 1e-3;
  Value y = tape.batch_norm_train(x, gamma, beta, eps, nullptr, 0.99);
  // mean 2, biased var 1: y = (x - 2) / sqrt(1 + eps)
  CHECK(tape.val(y).at(0, 0) == doctest::Approx(-1.0 / std::sqrt(1.0 + eps)).epsilon(1e-12));
  CHECK(tape.val(y).at(1, 0) == doctest::Approx(1.0 / std::sqrt(1.0 + eps)).epsilon(1e-12));
}

TEST_CASE("batch norm train statistics equal reference mean and variance") {
  std::mt19937_64 rng(5);
  Tensor<double> x = random_normal<double>({7, 3}, 2.0, rng);
  // Reference statistics computed directly.
  std::vector<double> mean(3, 0.0), var(3, 0.0);
  for (std::int64_t i = 0; i < 7; ++i)
    for (std::int64_t c = 0; c < 3; ++c) mean[static_cast<std::size_t>(c)] += x.at(i, c);
  for (auto& m : mean) m /= 7.0;
  for (std::int64_t i = 0; i < 7; ++i)
    for (std::int64_t c = 0; c < 3; ++c) {
      const double d = x.at(i, c) - mean[static_cast<std::size_t>(c)];
      var[static_cast<std::size_t>(c)] += d * d;
    }
  for (auto& v : var) v /= 7.0;

  // momentum 0 writes the batch statistics straight into the running slots.
  Tape<double> tape;
  BnRunning<double> run{Tensor<double>({3}), Tensor<double>({3})};
  Value xv = tape.leaf(x);
  Value gamma = tape.leaf(Tensor<double>::full({3}, 1.0));
  Value beta = tape.leaf(Tensor<double>({3}));
  tape.batch_norm_train(xv, gamma, beta, 1e-3, &run, 0.0);
  for (std::int64_t c = 0; c < 3; ++c) {
    CHECK(run.mean[c] == doctest::Approx(mean[static_cast<std::size_t>(c)]).epsilon(1e-12));
    CHECK(run.var[c] == doctest::Approx(var[static_cast<std::size_t>(c)]).epsilon(1e-12));
  }
}

TEST_CASE("batch norm infer mode is a fixed affine map") {
  std::mt19937_64 rng(9);
  Tensor<double> x = random_normal<double>({5, 2}, 1.0, rng);
  const double eps = 1e-8;
  {
    // Identity statistics pass the input through (up to eps).
    Tape<double> tape;
    Value y = tape.batch_norm_infer(tape.leaf(x), tape.leaf(Tensor<double>::full({2}, 1.0)),
                                    tape.leaf(Tensor<double>({2})), Tensor<double>({2}),
                                    Tensor<double>::full({2}, 1.0), eps);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      CHECK(tape.val(y)[i] == doctest::Approx(x[i]).epsilon(1e-7));
    }
  }
  {
    // With fixed statistics the map is affine per channel:
    // BN(x) = scale * x + shift with scale = gamma / sigma and
    // shift = beta - rm * scale; hence
    // BN(a x + b) = a BN(x) + b scale + (1 - a) shift.
    Tensor<double> rm = random_normal<double>({2}, 1.0, rng);
    Tensor<double> rv = Tensor<double>::full({2}, 2.0);
    Tensor<double> gamma = random_normal<double>({2}, 1.0, rng);
    Tensor<double> beta = random_normal<double>({2}, 1.0, rng);
    const double a = 1.7, b = -0.4;
    Tape<double> t1, t2;
    Value y1 = t1.batch_norm_infer(t1.leaf(x), t1.leaf(gamma), t1.leaf(beta), rm, rv, 1e-3);
    Tensor<double> ax = x;
    for (std::int64_t i = 0; i < ax.numel(); ++i) ax[i] = a * ax[i] + b;
    Value y2 = t2.batch_norm_infer(t2.leaf(ax), t2.leaf(gamma), t2.leaf(beta), rm, rv, 1e-3);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      const std::int64_t c = i % 2;
      const double scale = gamma[c] / std::sqrt(rv[c] + 1e-3);
      const double shift = beta[c] - rm[c] * scale;
      CHECK(t2.val(y2)[i] ==
            doctest::Approx(a * t1.val(y1)[i] + b * scale + (1.0 - a) * shift).epsilon(1e-9));
      CHECK(t1.val(y1)[i] == doctest::Approx(scale * x[i] + shift).epsilon(1e-9));
    }
  }
  {
    Tape<double> tape;
    Tensor<double> bad_var({2}, {1.0, 0.0});
    CHECK_THROWS_AS(tape.batch_norm_infer(tape.leaf(x), tape.leaf(Tensor<double>::full({2}, 1.0)),
                                          tape.leaf(Tensor<double>({2})), Tensor<double>({2}),
                                          bad_var, 1e-3),
                    NumericError);
  }
}

TEST_CASE("backward: sum loss gives all-ones gradient") {
  Tape<double> tape;
  Parameter<double> p{"p", Tensor<double>({3, 2}, {1, 2, 3, 4, 5, 6})};
  Value loss = tape.sum_all(tape.use(p));
  tape.backward(loss);
  const Tensor<double> g = tape.grad_of(p);
  for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 1.0);
}

TEST_CASE("backward: disconnected parameter gets a zero gradient") {
  Tape<double> tape;
  Parameter<double> used{"used", Tensor<double>({2}, {1, 2})};
  Parameter<double> unused{"unused", Tensor<double>({4}, {1, 2, 3, 4})};
  Value loss = tape.sum_all(tape.use(used));
  tape.backward(loss);
  const Tensor<double> g = tape.grad_of(unused);
  CHECK(g.numel() == 4);
  for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("backward: non-scalar loss is a usage error") {
  Tape<double> tape;
  Parameter<double> p{"p", Tensor<double>({2}, {1, 2})};
  Value v = tape.use(p);
  CHECK_THROWS_AS(tape.backward(v), UsageError);
}

TEST_CASE("backward visits each node once: reused operand accumulates exactly") {
  // loss = sum(x*x + x): d/dx = 2x + 1; a double visit would inflate it.
  Tape<double> tape;
  Parameter<double> p{"p", Tensor<double>({3}, {0.5, -1.25, 2.0})};
  Value x = tape.use(p);
  Value loss = tape.sum_all(tape.add(tape.mul(x, x), x));
  tape.backward(loss);
  const Tensor<double> g = tape.grad_of(p);
  for (std::int64_t i = 0; i < 3; ++i) {
    CHECK(g[i] == doctest::Approx(2.0 * p.value[i] + 1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward is linear: grad of a sum equals the sum of grads") {
  std::mt19937_64 rng(21);
  Parameter<double> p{"p", random_normal<double>({4}, 1.0, rng)};
  const auto grad_of_loss = [&](int which) {
    Tape<double> tape;
    Value x = tape.use(p);
    Value l1 = tape.sum_all(tape.mul(x, x));
    Value l2 = tape.sum_all(tape.swish(x));
    Value loss = which == 0 ? l1 : (which == 1 ? l2 : tape.add(l1, l2));
    tape.backward(loss);
    return tape.grad_of(p);
  };
  const Tensor<double> g1 = grad_of_loss(0);
  const Tensor<double> g2 = grad_of_loss(1);
  const Tensor<double> gsum = grad_of_loss(2);
  for (std::int64_t i = 0; i < 4; ++i) {
    CHECK(gsum[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
  }
}

TEST_CASE("finite differences validate every primitive gradient") {
  std::mt19937_64 rng(1234);
  const double tol = 1e-4;

  SUBCASE("elementwise and activations") {
    Parameter<double> a{"a", random_normal<double>({3, 4}, 1.0, rng)};
    Parameter<double> b{"b", random_normal<double>({3, 4}, 1.0, rng)};
    for (int mode = 0; mode < 6; ++mode) {
      const double err = max_grad_rel_err({&a, &b}, [&](Tape<double>& t) {
        Value x = t.use(a), y = t.use(b);
        switch (mode) {
          case 0: return t.sum_all(t.add(x, y));
          case 1: return t.sum_all(t.mul(x, y));
          case 2: return t.sum_all(t.swish(x));
          case 3: return t.sum_all(t.sigmoid(t.mul(x, y)));
          case 4: return t.sum_all(t.tanh(x));
          default: return t.sum_all(t.scale(t.relu(x), 0.7));
        }
      });
      CHECK(err < tol);
    }
  }

  SUBCASE("matmul, bias, gate") {
    Parameter<double> x{"x", random_normal<double>({4, 3}, 1.0, rng)};
    Parameter<double> w{"w", random_normal<double>({3, 5}, 1.0, rng)};
    Parameter<double> bias{"bias", random_normal<double>({5}, 1.0, rng)};
    Parameter<double> gate{"gate", random_normal<double>({3}, 1.0, rng)};
    const double err1 = max_grad_rel_err({&x, &w, &bias}, [&](Tape<double>& t) {
      return t.sum_all(t.swish(t.row_bias_add(t.matmul(t.use(x), t.use(w)), t.use(bias))));
    });
    CHECK(err1 < tol);
    const double err2 = max_grad_rel_err({&x, &gate}, [&](Tape<double>& t) {
      return t.sum_all(t.row_gate_mul(t.use(x), t.use(gate)));
    });
    CHECK(err2 < tol);
  }

  SUBCASE("reductions and views") {
    Parameter<double> x{"x", random_normal<double>({6, 3}, 1.0, rng)};
    const double err1 = max_grad_rel_err({&x}, [&](Tape<double>& t) {
      return t.sum_all(t.swish(t.mean_rows(t.use(x))));
    });
    CHECK(err1 < tol);
    for (std::int64_t window : {1, 2, 3, 4, 7, 11}) {
      const double err = max_grad_rel_err({&x}, [&](Tape<double>& t) {
        return t.sum_all(t.swish(t.sliding_mean(t.use(x), window)));
      });
      CHECK(err < tol);
    }
    const double err2 = max_grad_rel_err({&x}, [&](Tape<double>& t) {
      return t.sum_all(t.swish(t.subsample_rows(t.use(x), 2)));
    });
    CHECK(err2 < tol);
    const double err3 = max_grad_rel_err({&x}, [&](Tape<double>& t) {
      return t.sum_all(t.mul(t.slice_cols(t.use(x), 0, 2), t.slice_cols(t.use(x), 1, 3)));
    });
    CHECK(err3 < tol);
    Parameter<double> y{"y", random_normal<double>({2, 3}, 1.0, rng)};
    const double err4 = max_grad_rel_err({&x, &y}, [&](Tape<double>& t) {
      return t.sum_all(t.swish(t.stack_rows({t.use(x), t.use(y)})));
    });
    CHECK(err4 < tol);
    Parameter<double> table{"table", random_normal<double>({5, 3}, 1.0, rng)};
    const double err5 = max_grad_rel_err({&table}, [&](Tape<double>& t) {
      return t.sum_all(t.swish(t.gather_rows(t.use(table), {0, 3, 3, 1})));
    });
    CHECK(err5 < tol);
  }

  SUBCASE("depthwise conv, strides 1 and 2") {
    Parameter<double> x{"x", random_normal<double>({7, 3}, 1.0, rng)};
    Parameter<double> k{"k", random_normal<double>({5, 3}, 1.0, rng)};
    for (std::int64_t stride : {1, 2}) {
      const double err = max_grad_rel_err({&x, &k}, [&](Tape<double>& t) {
        return t.sum_all(t.swish(t.conv1d_depthwise(t.use(x), t.use(k), stride)));
      });
      CHECK(err < tol);
    }
  }

  SUBCASE("pairwise sum") {
    Parameter<double> a{"a", random_normal<double>({3, 4}, 1.0, rng)};
    Parameter<double> b{"b", random_normal<double>({2, 4}, 1.0, rng)};
    const double err = max_grad_rel_err({&a, &b}, [&](Tape<double>& t) {
      return t.sum_all(t.tanh(t.pairwise_sum(t.use(a), t.use(b))));
    });
    CHECK(err < tol);
  }

  SUBCASE("batch norm, train and infer") {
    Parameter<double> x{"x", random_normal<double>({6, 3}, 1.0, rng)};
    Parameter<double> gamma{"gamma", random_normal<double>({3}, 0.3, rng)};
    Parameter<double> beta{"beta", random_normal<double>({3}, 0.3, rng)};
    for (std::int64_t i = 0; i < 3; ++i) gamma.value[i] += 1.0;
    const double err1 = max_grad_rel_err({&x, &gamma, &beta}, [&](Tape<double>& t) {
      return t.sum_all(
          t.swish(t.batch_norm_train(t.use(x), t.use(gamma), t.use(beta), 1e-3, nullptr, 0.99)));
    });
    CHECK(err1 < tol);
    Tensor<double> rm = random_normal<double>({3}, 0.5, rng);
    Tensor<double> rv = Tensor<double>::full({3}, 1.5);
    const double err2 = max_grad_rel_err({&x, &gamma, &beta}, [&](Tape<double>& t) {
      return t.sum_all(t.swish(t.batch_norm_infer(t.use(x), t.use(gamma), t.use(beta), rm, rv, 1e-3)));
    });
    CHECK(err2 < tol);
  }

  SUBCASE("batch norm couples utterances through shared statistics") {
    Parameter<double> x1{"x1", random_normal<double>({4, 2}, 1.0, rng)};
    Parameter<double> x2{"x2", random_normal<double>({6, 2}, 1.0, rng)};
    Parameter<double> gamma{"gamma", Tensor<double>::full({2}, 1.1)};
    Parameter<double> beta{"beta", random_normal<double>({2}, 0.3, rng)};
    const double err = max_grad_rel_err({&x1, &x2, &gamma, &beta}, [&](Tape<double>& t) {
      auto outs = t.batch_norm_train_multi({t.use(x1), t.use(x2)}, t.use(gamma), t.use(beta),
                                           1e-3, nullptr, 0.99);
      return t.sum_all(t.add(t.sum_all(t.swish(outs[0])), t.sum_all(t.swish(outs[1]))));
    });
    CHECK(err < tol);
  }
}

TEST_CASE("forward kernels keep finite inputs finite") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> x = random_normal<double>({8, 4}, 10.0, rng);
    Tensor<double> k = random_normal<double>({5, 4}, 10.0, rng);
    CHECK(kernels::conv1d_depthwise(x, k, 1).all_finite());
    CHECK(kernels::swish(x).all_finite());
    CHECK(kernels::sigmoid(x).all_finite());
    CHECK(kernels::sliding_mean(x, 3).all_finite());
  }
}
