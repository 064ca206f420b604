// Copyright 2026 The WMI-AI Desk Authors.
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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "wmi/errors.hpp"
#include "wmi/trainer.hpp"

using namespace wmi;
using namespace wmi::train;
using wmi::testing::random_tensor;

namespace {

const synth::Dataset& small_data() {
  static const synth::Dataset d = [] {
    synth::GenerateOptions o;
    o.age_window = 20.0;
    return synth::generate_dataset(3, 20, 12, o);
  }();
  return d;
}

TrainConfig small_config() {
  TrainConfig c = fast_preset();
  c.steps = 30;
  c.batch_size = 32;
  c.n_critic = 2;
  c.probe_every = 10;
  c.probe_steps = 20;
  c.probe_samples = 64;
  return c;
}

synth::Batch first_batch(const TrainConfig& c) {
  synth::BatchIter it(small_data(), c.batch_size, 1);
  synth::Batch b;
  it.next(b);
  return b;
}

Tensor cluster(std::size_t n, std::size_t d, double center, Rng& rng) {
  Tensor t(Shape{n, d});
  for (double& v : t.data()) v = center + 0.1 * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("metrics rows: CSV formatting with absent fields") {
  MetricsRow r;
  r.step = 3;
  r.l_id = 1.5;
  r.l_a = 0.25;
  r.lr_encoder = 0.01;
  CHECK(metrics_line(r) == "3,1.5,0.25,,,,0.01");
  r.l_w = 0.5;
  r.l_grad = 2.0;
  r.jsd_probe = 0.125;
  CHECK(metrics_line(r) == "3,1.5,0.25,0.5,2,0.125,0.01");
}

TEST_CASE("lr_factor: linear decay to zero, constant option") {
  TrainConfig c;
  c.steps = 4;
  CHECK(lr_factor(c, 0) == 1.0);
  CHECK(lr_factor(c, 2) == 0.5);
  CHECK(lr_factor(c, 3) == 0.25);
  c.lr_decay = LrDecay::kConstant;
  CHECK(lr_factor(c, 3) == 1.0);
}

TEST_CASE("critic_phase: encoders are bit-identical afterwards") {
  const TrainConfig c = small_config();
  TrainState s = init_state(c, small_data());
  const auto before = s.params;
  const auto b = first_batch(c);
  critic_phase(s, nets::embed_id(b.x, s.params, s.arch), nets::embed_age(b.x, s.params, s.arch), c, 0);
  for (auto net : {nets::kIdEncoder, nets::kIdHead, nets::kAgeEncoder, nets::kAgeHead}) {
    CHECK(s.params.net_equals(net, before));
  }
  CHECK_FALSE(s.params.net_equals(nets::kCritic, before));
}

TEST_CASE("encoder_phase: critic is bit-identical; f_a receives no adversarial gradient") {
  TrainConfig c = small_config();
  c.weights.lambda_w = 1.0;
  TrainState s = init_state(c, small_data());
  const auto b = first_batch(c);
  critic_phase(s, nets::embed_id(b.x, s.params, s.arch), nets::embed_age(b.x, s.params, s.arch), c, 0);
  for (const Tensor& g : adversarial_age_gradient(s, b, c, 0)) CHECK(g == Tensor(g.shape(), 0.0));
  const auto before = s.params;
  const auto losses = encoder_phase(s, b, c, 0);
  CHECK(losses.l_w.has_value());
  CHECK(s.params.net_equals(nets::kCritic, before));
  CHECK_FALSE(s.params.net_equals(nets::kIdEncoder, before));
  CHECK_FALSE(s.params.net_equals(nets::kAgeEncoder, before));
}

TEST_CASE("critic_step: L_w rises monotonically on two separated clusters") {
  Rng rng(4);
  const Tensor joint = cluster(64, 24, 0.5, rng);
  const Tensor product = cluster(64, 24, -0.5, rng);
  const nets::Architecture arch;
  nets::ModelParams p;
  nets::init_mlp(arch.critic, nets::kCritic, 9, p);
  optim::OptimizerState state;
  double previous = -INFINITY;
  for (std::uint64_t k = 0; k < 21; ++k) {
    const CriticStep s = critic_step(p, arch.critic, nets::kCritic, joint, product, 10.0, k, {}, state);
    if (k > 0) CHECK(s.l_w > previous);
    previous = s.l_w;
  }
}

TEST_CASE("critic_step: a tiny step does not decrease L_w - lambda_g L_grad") {
  Rng rng(5);
  const nets::Architecture arch;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Tensor joint = random_tensor({32, 24}, rng);
    const Tensor product = random_tensor({32, 24}, rng);
    nets::ModelParams p;
    nets::init_mlp(arch.critic, nets::kCritic, trial, p);
    const CriticStep before = critic_losses(p, arch.critic, nets::kCritic, joint, product, trial);
    optim::OptimizerState state;
    critic_step(p, arch.critic, nets::kCritic, joint, product, 10.0, trial, {1e-6, 0.99, 1e-8}, state);
    const CriticStep after = critic_losses(p, arch.critic, nets::kCritic, joint, product, trial);
    CHECK(after.l_w - 10.0 * after.l_grad >= before.l_w - 10.0 * before.l_grad);
  }
}

TEST_CASE("fit_jsd_probe: estimator range and separation") {
  Rng rng(6);
  const nets::MlpSpec spec{{2, 16, 1}, nets::Activation::kLeakyRelu, false};
  ProbeOptions o;
  o.steps = 150;
  o.rms.lr = 1e-2;
  const double far = fit_jsd_probe(spec, cluster(200, 2, 2.0, rng), cluster(200, 2, -2.0, rng),
                                   cluster(200, 2, 2.0, rng), cluster(200, 2, -2.0, rng), o);
  CHECK(far > 0.6);
  CHECK(far <= std::numbers::ln2);
  const double same = fit_jsd_probe(spec, cluster(200, 2, 0.0, rng), cluster(200, 2, 0.0, rng),
                                    cluster(200, 2, 0.0, rng), cluster(200, 2, 0.0, rng), o);
  CHECK(same >= 0.0);
  CHECK(same < 0.05);
}

TEST_CASE("train: bit-reproducible metrics and parameters") {
  const TrainConfig c = small_config();
  const TrainResult a = train::train(c, small_data());
  const TrainResult b = train::train(c, small_data());
  REQUIRE(a.rows.size() == c.steps);
  CHECK(a.rows == b.rows);
  CHECK(a.state.params == b.state.params);
  CHECK(a.rows.front().jsd_probe.has_value());
  CHECK(a.rows[10].jsd_probe.has_value());
  CHECK_FALSE(a.rows[11].jsd_probe.has_value());
  CHECK(a.rows.back().jsd_probe.has_value());
  CHECK(a.final_jsd == *a.rows.back().jsd_probe);
  for (const auto& r : a.rows) {
    if (r.jsd_probe) {
      CHECK(*r.jsd_probe >= 0.0);
      CHECK(*r.jsd_probe <= std::numbers::ln2);
    }
  }
}

TEST_CASE("train: lambda_w = 0 matches a critic-free run parameter for parameter") {
  TrainConfig c = small_config();
  c.weights.lambda_w = 0.0;
  const TrainResult with_critic = train::train(c, small_data());
  c.critic = false;
  const TrainResult without = train::train(c, small_data());
  for (auto net : {nets::kIdEncoder, nets::kIdHead, nets::kAgeEncoder, nets::kAgeHead}) {
    CHECK(with_critic.state.params.net_equals(net, without.state.params));
  }
  CHECK(with_critic.rows.back().l_w.has_value());
  CHECK_FALSE(without.rows.back().l_w.has_value());
}

TEST_CASE("train: L_id falls below half its initial value") {
  TrainConfig c = small_config();
  c.steps = 150;
  c.lr_encoder = 0.1;
  const TrainResult r = train::train(c, small_data());
  CHECK(r.rows.back().l_id < 0.5 * r.rows.front().l_id);
}

TEST_CASE("train: a NaN input is reported as a named non-finite quantity") {
  synth::Dataset poisoned = small_data();
  poisoned.x(5, 3) = std::nan("");
  TrainConfig c = small_config();
  c.batch_size = static_cast<std::size_t>(poisoned.size());
  try {
    train::train(c, poisoned);
    FAIL("expected a non-finite error");
  } catch (const NonFiniteError& e) {
    CHECK_FALSE(e.tensor().empty());
    CHECK(e.step() == 0);
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("pretrain_age_encoder: beats chance; pretrained mode never moves f_a") {
  TrainConfig c = small_config();
  c.steps = 300;
  c.lr_age = 0.05;
  const synth::Dataset full = synth::generate_dataset(13, 60, 20);
  const PretrainResult pre = pretrain_age_encoder(full, c);
  double tail = 0.0;
  for (std::size_t i = pre.l_a.size() - 20; i < pre.l_a.size(); ++i) tail += pre.l_a[i] / 20.0;
  CHECK(tail < std::log(16.0));

  const synth::Dataset held_out = [] {
    synth::GenerateOptions o;
    o.identity_offset = 60;
    return synth::generate_dataset(13, 30, 20, o);
  }();
  CHECK(age_bin_accuracy(pre.state, held_out, c) > 0.5);

  c.mode = losses::AgeMode::kPretrained;
  c.steps = 20;
  const TrainResult r = train::train(c, full, &pre.state.params);
  CHECK(r.state.params.net_equals(nets::kAgeEncoder, pre.state.params));
  CHECK(r.state.params.net_equals(nets::kAgeHead, pre.state.params));
  CHECK_THROWS_AS(init_state(c, full, nullptr), ConfigError);
}
