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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wmi/checkpoint.hpp"
#include "wmi/config.hpp"
#include "wmi/nets.hpp"
#include "wmi/optim.hpp"
#include "wmi/synthdata.hpp"

namespace wmi::train {

/// One encoder step. L_w / L_grad are absent when the critic is disabled;
/// jsd_probe is present only on probe steps.
struct MetricsRow {
  std::size_t step = 0;
  double l_id = 0.0;
  double l_a = 0.0;
  std::optional<double> l_w;
  std::optional<double> l_grad;
  std::optional<double> jsd_probe;
  double lr_encoder = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr std::string_view kMetricsHeader = "step,L_id,L_a,L_w,L_grad,jsd_probe,lr_encoder";
std::string metrics_line(const MetricsRow& row);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

// ---- critic and probe over an arbitrary scalar-output MLP ------------------

struct CriticStep {
  double l_w = 0.0;
  double l_grad = 0.0;
};

/// L_w and L_grad of the critic `net` (no update).
CriticStep critic_losses(const nets::ModelParams& params, const nets::MlpSpec& spec, std::string_view net,
                         const Tensor& joint, const Tensor& product, std::uint64_t interp_seed);

/// One RMSprop ascent step on L_w - lambda_g L_grad over the parameters of
/// `net`. Returns the losses measured before the update.
CriticStep critic_step(nets::ModelParams& params, const nets::MlpSpec& spec, std::string_view net,
                       const Tensor& joint, const Tensor& product, double lambda_g, std::uint64_t interp_seed,
                       const optim::RmsPropOptions& opt, optim::OptimizerState& state);

/// Score gap mean f(joint) - mean f(product).
double critic_distance(const nets::ModelParams& params, const nets::MlpSpec& spec, std::string_view net,
                       const Tensor& joint, const Tensor& product);

struct ProbeOptions {
  std::size_t steps = 200;
  optim::RmsPropOptions rms{1e-3, 0.99, 1e-8};
  std::uint64_t seed = 0;
};

/// Trains a fresh sigmoid discriminator on the train split and returns the
/// JSD estimate on the held-out split.
double fit_jsd_probe(const nets::MlpSpec& spec, const Tensor& joint_train, const Tensor& product_train,
                     const Tensor& joint_test, const Tensor& product_test, const ProbeOptions& opt);

// ---- the multitask adversarial procedure -----------------------------------

struct TrainState {
  nets::Architecture arch;
  nets::ModelParams params;
  optim::OptimizerState opt;
};

nets::Architecture architecture_for(const TrainConfig& cfg, const synth::Dataset& data);

/// Fresh parameters. In pretrained mode `pretrained_age` supplies f_a / g_a.
TrainState init_state(const TrainConfig& cfg, const synth::Dataset& data,
                      const nets::ModelParams* pretrained_age = nullptr);

/// Learning rate multiplier at `step` under the configured decay.
double lr_factor(const TrainConfig& cfg, std::size_t step);

/// n_critic ascent iterations on frozen embeddings, each with a fresh
/// derangement and fresh interpolation weights. Returns the last iteration's
/// losses.
CriticStep critic_phase(TrainState& s, const Tensor& id_emb, const Tensor& age_emb, const TrainConfig& cfg,
                        std::size_t step);

struct EncoderLosses {
  double l_id = 0.0;
  double l_a = 0.0;
  std::optional<double> l_w;
};

/// One SGD step of f_id / g_id on L_id + lambda_w L_w and of f_a / g_a on
/// lambda_a L_a (pretrained mode: f_a / g_a stay fixed). The critic is a
/// constant here.
EncoderLosses encoder_phase(TrainState& s, const synth::Batch& batch, const TrainConfig& cfg, std::size_t step);

/// Age-embedding contribution to the adversarial term: gradient of L_w
/// with respect to the f_a parameters as wired in encoder_phase.
std::vector<Tensor> adversarial_age_gradient(const TrainState& s, const synth::Batch& batch,
                                             const TrainConfig& cfg, std::size_t step);

/// JSD probe on a fixed snapshot of rows.
double probe_jsd(const TrainState& s, const synth::Dataset& data, std::span<const std::size_t> rows,
                 const TrainConfig& cfg, std::size_t step);

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> rows;
  double final_jsd = 0.0;
};

using Progress = std::function<void(const MetricsRow&)>;

/// Full run. Throws NonFiniteError naming the first non-finite quantity.
TrainResult train(const TrainConfig& cfg, const synth::Dataset& data,
                  const nets::ModelParams* pretrained_age = nullptr, const Progress& progress = {});

/// Trains f_a / g_a alone on L_a for cfg.steps steps.
struct PretrainResult {
  TrainState state;
  std::vector<double> l_a;
};
PretrainResult pretrain_age_encoder(const synth::Dataset& data, const TrainConfig& cfg);

/// Fraction of rows whose arg-max age bin matches the true bin.
double age_bin_accuracy(const TrainState& s, const synth::Dataset& data, const TrainConfig& cfg);

Checkpoint to_checkpoint(const TrainState& s, const TrainConfig& cfg);

}  // namespace wmi::train
