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
#include <string>
#include <string_view>

#include "wmi/losses.hpp"

namespace wmi {

enum class LrDecay { kLinear, kConstant };

struct TrainConfig {
  // [model]
  std::size_t d_id = 16;
  std::size_t d_a = 8;
  // [loss]
  losses::LossWeights weights;
  // [optim]
  double lr_encoder = 0.01;
  double lr_age = 0.01;
  double lr_critic = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double rms_alpha = 0.99;
  double rms_eps = 1e-8;
  LrDecay lr_decay = LrDecay::kLinear;
  // [schedule]
  std::size_t steps = 1000;
  std::size_t batch_size = 128;
  std::size_t n_critic = 50;
  bool critic = true;  // false skips the critic phase and L_w entirely
  // [probe]
  std::size_t probe_every = 50;
  std::size_t probe_steps = 200;
  std::size_t probe_samples = 1024;
  double probe_lr = 1e-3;
  // [seeds]
  std::uint64_t seed_params = 1;
  std::uint64_t seed_data = 2;
  std::uint64_t seed_shuffle = 3;
  // [train]
  losses::AgeMode mode = losses::AgeMode::kSupervised;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Small, fast settings for tests and smoke runs (n_critic = 5).
TrainConfig fast_preset();

/// Sectioned "key = value" text; every field is always written.
std::string config_to_text(const TrainConfig& c);
/// Parses text over the defaults. Unknown keys or malformed values throw
/// ConfigError with the line number.
TrainConfig config_from_text(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path);

/// Sets one field by dotted name, e.g. "loss.lambda_w".
void set_config_value(TrainConfig& c, std::string_view dotted_key, std::string_view value);

/// FNV-1a of the canonical text, 16 hex digits.
std::string config_hash(const TrainConfig& c);

std::string_view mode_name(losses::AgeMode m) noexcept;
losses::AgeMode parse_mode(std::string_view s);

}  // namespace wmi
