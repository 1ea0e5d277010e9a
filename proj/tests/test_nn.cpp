// Copyright 2026 The binauralforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "binauralforge/nn/checkpoint.hpp"
#include "binauralforge/nn/conv.hpp"
#include "binauralforge/nn/layers.hpp"
#include "binauralforge/nn/optim.hpp"
#include "binauralforge/nn/tensor.hpp"
#include "binauralforge/nn/unet.hpp"
#include "test_util.hpp"

using namespace bf;
using nn::Shape;
using nn::Tensor;

namespace {
constexpr double kGradTol = 1e-6;  // double-precision central differences

Tensor<double> randt(const Shape& s, Rng& rng, bool rg = true) {
  return Tensor<double>::randn(s, rng, 0.5, rg);
}
}  // namespace

TEST_CASE("elementwise op gradients") {
  Rng rng(1);
  auto a = randt({3, 4}, rng);
  auto b = randt({3, 4}, rng);
  CHECK(bft::grad_check([&] { return nn::sum(nn::mul(nn::add(a, b), a)); },
                        {a, b}) < kGradTol);
  CHECK(bft::grad_check([&] { return nn::mean(nn::sub(nn::silu(a), b)); },
                        {a, b}) < kGradTol);
  CHECK(bft::grad_check([&] { return nn::sum(nn::exp_(nn::scale(a, 0.3))); },
                        {a}) < kGradTol);
  CHECK(bft::grad_check([&] { return nn::mse(a, b); }, {a, b}) < kGradTol);
  CHECK(bft::grad_check(
            [&] { return nn::sum(nn::softmax(nn::reshape(a, {4, 3}))); },
            {a}) < kGradTol);
}

TEST_CASE("clamp gradient is straight-through strictly inside the range") {
  Rng rng(2);
  auto a = Tensor<double>::from_values({5}, {-2.0, -0.4, 0.1, 0.4, 3.0}, true);
  auto loss = nn::sum(nn::mul(nn::clamp(a, -1.0, 1.0), a));
  a.zero_grad();
  loss.backward();
  // Saturated cells only see the second factor's gradient.
  CHECK(a.grad()[0] == doctest::Approx(-1.0));
  CHECK(a.grad()[4] == doctest::Approx(1.0));
  CHECK(a.grad()[2] == doctest::Approx(0.2));
  (void)rng;
}

TEST_CASE("matmul / bias / concat / split / transpose gradients") {
  Rng rng(3);
  auto a = randt({3, 5}, rng);
  auto b = randt({5, 4}, rng);
  auto bias = randt({4}, rng);
  CHECK(bft::grad_check(
            [&] {
              return nn::sum(nn::add_row_bias(nn::matmul(a, b), bias));
            },
            {a, b, bias}) < kGradTol);
  auto c = randt({2, 6}, rng);
  CHECK(bft::grad_check(
            [&] {
              auto parts = nn::split(c, {2, 4}, 1);
              return nn::sum(nn::concat(
                  std::vector<Tensor<double>>{parts[1], parts[0]}, 1));
            },
            {c}) < kGradTol);
  CHECK(bft::grad_check(
            [&] { return nn::sum(nn::mul(nn::transpose2d(a), nn::transpose2d(a))); },
            {a}) < kGradTol);
  auto table = randt({6, 3}, rng);
  CHECK(bft::grad_check(
            [&] {
              return nn::sum(nn::select_rows(table, {0, 2, 2, 5}));
            },
            {table}) < kGradTol);
}

TEST_CASE("conv2d and conv2d_transpose gradients") {
  Rng rng(4);
  auto x = randt({2, 3, 6, 5}, rng);
  auto w = randt({4, 3, 3, 3}, rng);
  auto cb = randt({4}, rng);
  CHECK(bft::grad_check(
            [&] {
              return nn::sum(
                  nn::add_channel_bias(nn::conv2d(x, w, 2, 1), cb));
            },
            {x, w, cb}) < kGradTol);
  auto wt = randt({3, 4, 4, 4}, rng);
  CHECK(bft::grad_check(
            [&] { return nn::sum(nn::conv2d_transpose(x, wt, 2, 1)); },
            {x, wt}) < kGradTol);
}

TEST_CASE("group_norm gradient") {
  Rng rng(5);
  auto x = randt({2, 4, 3, 3}, rng);
  auto gamma = randt({4}, rng);
  auto beta = randt({4}, rng);
  CHECK(bft::grad_check(
            [&] {
              return nn::sum(nn::mul(nn::group_norm(x, 2, gamma, beta), x));
            },
            {x, gamma, beta}) < 1e-5);
}

TEST_CASE("cross_entropy matches a hand-computed value and gradient") {
  auto logits = Tensor<double>::from_values(
      {2, 3}, {1.0, 2.0, 0.5, -1.0, 0.0, 1.0}, true);
  std::vector<int64_t> labels{1, 2};
  auto loss = nn::cross_entropy(logits, labels);
  // Hand value: mean of -log softmax at the labels.
  auto nll = [](std::vector<double> row, int y) {
    double m = *std::max_element(row.begin(), row.end());
    double z = 0;
    for (double v : row) z += std::exp(v - m);
    return -(row[y] - m - std::log(z));
  };
  const double expect =
      0.5 * (nll({1.0, 2.0, 0.5}, 1) + nll({-1.0, 0.0, 1.0}, 2));
  CHECK(loss.item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(bft::grad_check([&] { return nn::cross_entropy(logits, labels); },
                        {logits}) < kGradTol);
}

TEST_CASE("cross-attention layer gradient") {
  Rng rng(6);
  nn::ParamRegistry<double> reg;
  nn::CrossAttention<double> attn(reg, "attn", 8, 6, 2, rng);
  auto x = randt({1, 4, 8}, rng);
  auto ctx = randt({3, 6}, rng);
  std::vector<Tensor<double>> params{x, ctx};
  for (auto& [name, t] : reg.params) params.push_back(t);
  CHECK(bft::grad_check([&] { return nn::sum(attn.forward(x, ctx)); },
                        params) < 1e-5);
}

TEST_CASE("sinusoidal embedding values") {
  auto e = nn::sinusoidal_embedding<double>(5, 8);
  REQUIRE(e.shape() == Shape{1, 8});
  // Half sines, half cosines over geometric frequencies.
  CHECK(e.values()[0] == doctest::Approx(std::sin(5.0)));
  CHECK(e.values()[4] == doctest::Approx(std::cos(5.0)));
  auto e2 = nn::sinusoidal_embedding<double>(5, 8);
  CHECK(e.values() == e2.values());
}

TEST_CASE("assembled U-Net gradient check at toy size") {
  Rng rng(7);
  nn::UnetConfig cfg;
  cfg.in_channels = 2;
  cfg.widths = {4, 4, 8};
  cfg.res_blocks = 1;
  cfg.heads = 2;
  cfg.d_ctx = 4;
  cfg.time_dim = 8;
  cfg.norm_groups = 2;
  nn::ParamRegistry<double> reg;
  nn::Unet<double> unet(reg, cfg, rng);
  auto x = randt({1, 2, 8, 4}, rng);
  auto ctx = randt({3, 4}, rng);
  std::vector<Tensor<double>> params{x, ctx};
  for (auto& [name, t] : reg.params) params.push_back(t);
  CHECK(bft::grad_check(
            [&] { return nn::mean(unet.forward(x, 17, ctx)); }, params,
            1e-5) < 1e-4);
}

TEST_CASE("AdamW matches a hand-computed step") {
  nn::ParamRegistry<double> reg;
  auto p = reg.add("p", Tensor<double>::from_values({1}, {1.0}, true));
  nn::OptimizerConfig cfg;
  cfg.lr = 0.1;
  auto opt = nn::make_adam(reg, cfg);
  p.grad()[0] = 0.5;
  opt.step();
  // m = 0.05, v = 0.00025; bias-corrected: mhat = 0.5, vhat = 0.25.
  const double expect = 1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + cfg.eps);
  CHECK(p.values()[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("linear lr schedule decays to zero") {
  nn::ParamRegistry<double> reg;
  auto p = reg.add("p", Tensor<double>::from_values({1}, {1.0}, true));
  nn::OptimizerConfig cfg;
  cfg.lr = 0.1;
  cfg.total_steps = 4;
  auto opt = nn::make_adam(reg, cfg);
  CHECK(opt.current_lr() == doctest::Approx(0.1));
  for (int i = 0; i < 4; ++i) {
    p.grad()[0] = 1.0;
    opt.step();
  }
  CHECK(opt.current_lr() == doctest::Approx(0.0));
}

TEST_CASE("checkpoints roundtrip and detect corruption") {
  auto dir = bft::scratch_dir("nn_ckpt");
  Rng rng(8);
  nn::ParamRegistry<float> reg;
  reg.add("a", Tensor<float>::randn({3, 4}, rng, 1.0, true));
  reg.add("b", Tensor<float>::randn({7}, rng, 1.0, true));
  const std::string path = dir + "/m.ckpt";
  bf::nn::save_checkpoint(reg, path, {42, 7});

  nn::ParamRegistry<float> reg2;
  reg2.add("a", Tensor<float>::zeros({3, 4}, true));
  reg2.add("b", Tensor<float>::zeros({7}, true));
  auto meta = bf::nn::load_checkpoint(reg2, path);
  CHECK(meta.step == 42);
  CHECK(reg2.params[0].second.values() == reg.params[0].second.values());
  CHECK(reg2.params[1].second.values() == reg.params[1].second.values());

  // Flip one payload byte: the checksum must catch it.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    char c;
    f.seekg(40);
    f.read(&c, 1);
    c ^= 0x01;
    f.seekp(40);
    f.write(&c, 1);
  }
  CHECK_THROWS_AS(bf::nn::load_checkpoint(reg2, path), RuntimeError);
}
