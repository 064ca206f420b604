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

#include "wmi/optim.hpp"

#include <cmath>

#include "wmi/errors.hpp"

namespace wmi::optim {
namespace {

void check(const char* op, std::span<const std::string> names, std::span<const Tensor> grads,
           const nets::ModelParams& params) {
  if (names.size() != grads.size()) {
    throw ShapeError(op, std::to_string(names.size()) + " names", std::to_string(grads.size()) + " grads");
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Tensor& p = params.at(names[i]);
    if (p.shape() != grads[i].shape()) throw ShapeError(std::string(op) + " " + names[i], p.shape().str(), grads[i].shape().str());
  }
}

}  // namespace

Tensor& OptimizerState::slot(std::string_view kind, std::string_view param, Shape shape) {
  const std::string key = std::string(kind) + "." + std::string(param);
  if (!buffers_.contains(key)) buffers_.set(key, Tensor(shape, 0.0));
  Tensor& t = buffers_.at(key);
  if (t.shape() != shape) throw ShapeError("optimizer buffer " + key, t.shape().str(), shape.str());
  return t;
}

void sgd_step(nets::ModelParams& params, std::span<const std::string> names, std::span<const Tensor> grads,
              const SgdOptions& opt, OptimizerState& state) {
  check("sgd_step", names, grads, params);
  for (std::size_t i = 0; i < names.size(); ++i) {
    Tensor& p = params.at(names[i]);
    Tensor& v = state.slot("sgd", names[i], p.shape());
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = opt.momentum * v[k] + (g[k] + opt.weight_decay * p[k]);
      p[k] -= opt.lr * v[k];
    }
  }
}

void rmsprop_step(nets::ModelParams& params, std::span<const std::string> names, std::span<const Tensor> grads,
                  const RmsPropOptions& opt, OptimizerState& state) {
  check("rmsprop_step", names, grads, params);
  for (std::size_t i = 0; i < names.size(); ++i) {
    Tensor& p = params.at(names[i]);
    Tensor& r = state.slot("rms", names[i], p.shape());
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      r[k] = opt.alpha * r[k] + (1.0 - opt.alpha) * g[k] * g[k];
      p[k] -= opt.lr * g[k] / (std::sqrt(r[k]) + opt.eps);
    }
  }
}

}  // namespace wmi::optim
