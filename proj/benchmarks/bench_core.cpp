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

// Microbenchmarks for the hot paths of one training step and of evaluation.

#include <benchmark/benchmark.h>

#include <vector>

#include "wmi/autodiff.hpp"
#include "wmi/evalsuite.hpp"
#include "wmi/losses.hpp"
#include "wmi/nets.hpp"
#include "wmi/optim.hpp"
#include "wmi/rng.hpp"
#include "wmi/synthdata.hpp"
#include "wmi/trainer.hpp"

namespace {

wmi::Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  wmi::Rng rng(seed);
  wmi::Tensor t(wmi::Shape{r, c});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor(n, 64, 1), b = random_tensor(64, 64, 2);
  for (auto _ : state) {
    wmi::ad::Graph g;
    const auto x = g.leaf(a), w = g.leaf(b);
    const auto y = wmi::ad::sum_all(wmi::ad::tanh(wmi::ad::matmul(x, w)));
    const std::vector<wmi::ad::Var> wrt = {w};
    benchmark::DoNotOptimize(wmi::ad::grad_values(y, wrt));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(64)->Arg(128)->Arg(512);

void BM_MarginSoftmax(benchmark::State& state) {
  const auto classes = static_cast<std::size_t>(state.range(0));
  const auto emb = random_tensor(128, 16, 3), w = random_tensor(classes, 16, 4);
  std::vector<int> labels(128);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % classes);
  for (auto _ : state) {
    wmi::ad::Graph g;
    const auto e = wmi::ad::l2_normalize(g.leaf(emb));
    const auto c = g.leaf(w);
    const auto loss = wmi::losses::margin_softmax_loss(e, wmi::ad::l2_normalize(c), labels, 64.0, 0.5);
    const std::vector<wmi::ad::Var> wrt = {c};
    benchmark::DoNotOptimize(wmi::ad::grad_values(loss, wrt));
  }
}
BENCHMARK(BM_MarginSoftmax)->Arg(200)->Arg(1000);

// One critic iteration: L_w, the gradient penalty (double backprop) and RMSprop.
void BM_CriticStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const wmi::nets::Architecture arch;
  auto params = wmi::nets::init_params(arch, 1);
  wmi::optim::OptimizerState opt;
  const auto joint = random_tensor(n, 24, 5), product = random_tensor(n, 24, 6);
  std::uint64_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(wmi::train::critic_step(params, arch.critic, wmi::nets::kCritic, joint, product, 10.0,
                                                     k++, {}, opt));
  }
}
BENCHMARK(BM_CriticStep)->Arg(64)->Arg(128);

void BM_EncoderStep(benchmark::State& state) {
  const auto data = wmi::synth::generate_dataset(1, 200, 10);
  wmi::TrainConfig cfg;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  auto s = wmi::train::init_state(cfg, data);
  wmi::synth::BatchIter it(data, cfg.batch_size, 1);
  wmi::synth::Batch b;
  it.next(b);
  std::size_t step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(wmi::train::encoder_phase(s, b, cfg, step++ % cfg.steps));
}
BENCHMARK(BM_EncoderStep)->Arg(64)->Arg(128);

void BM_ShufflePairs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto id = random_tensor(n, 16, 7), age = random_tensor(n, 8, 8);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(wmi::synth::shuffle_pairs(id, age, seed++));
}
BENCHMARK(BM_ShufflePairs)->Arg(128)->Arg(1024);

void BM_VerifyScored(benchmark::State& state) {
  wmi::Rng rng(9);
  std::vector<std::vector<wmi::eval::ScoredPair>> folds(10);
  for (auto& f : folds) {
    for (int i = 0; i < 600; ++i) f.push_back({rng.normal() + (i % 2 ? 1.0 : 0.0), i % 2 == 1});
  }
  for (auto _ : state) benchmark::DoNotOptimize(wmi::eval::verify_scored(folds));
}
BENCHMARK(BM_VerifyScored);

void BM_AgeLeakageProbe(benchmark::State& state) {
  const auto emb = random_tensor(3000, 16, 10);
  std::vector<double> ages(3000);
  wmi::Rng rng(11);
  for (double& a : ages) a = rng.uniform(0.0, 80.0);
  for (auto _ : state) benchmark::DoNotOptimize(wmi::eval::age_leakage_probe(emb, ages, {1e-3, 1}));
}
BENCHMARK(BM_AgeLeakageProbe);

void BM_GenerateDataset(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(wmi::synth::generate_dataset(1, 100, 30));
}
BENCHMARK(BM_GenerateDataset);

}  // namespace

BENCHMARK_MAIN();
