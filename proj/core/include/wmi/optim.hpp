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

#include <span>
#include <string>
#include <string_view>

#include "wmi/nets.hpp"
#include "wmi/tensor.hpp"

namespace wmi::optim {

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct RmsPropOptions {
  double lr = 1e-4;
  double alpha = 0.99;
  double eps = 1e-8;
};

/// Per-parameter buffers, stored under "sgd.<param>" (momentum) and
/// "rms.<param>" (running mean of squared gradients). Buffers are created as
/// zeros on first use.
class OptimizerState {
 public:
  OptimizerState() = default;
  explicit OptimizerState(nets::ModelParams buffers) : buffers_(std::move(buffers)) {}

  Tensor& slot(std::string_view kind, std::string_view param, Shape shape);
  const nets::ModelParams& buffers() const noexcept { return buffers_; }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;

 private:
  nets::ModelParams buffers_;
};

/// v <- momentum v + (g + wd p); p <- p - lr v, for every named parameter.
void sgd_step(nets::ModelParams& params, std::span<const std::string> names, std::span<const Tensor> grads,
              const SgdOptions& opt, OptimizerState& state);

/// r <- alpha r + (1 - alpha) g^2; p <- p - lr g / (sqrt(r) + eps).
void rmsprop_step(nets::ModelParams& params, std::span<const std::string> names, std::span<const Tensor> grads,
                  const RmsPropOptions& opt, OptimizerState& state);

}  // namespace wmi::optim
