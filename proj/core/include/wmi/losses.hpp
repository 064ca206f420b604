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
#include <functional>
#include <span>

#include "wmi/autodiff.hpp"
#include "wmi/tensor.hpp"

namespace wmi::losses {

/// Which attribute channel feeds the disentanglement term.
enum class AgeMode {
  kSupervised,  // f_a/g_a train on L_a alongside the identity channel
  kPretrained,  // f_a is a frozen, separately trained encoder; L_a is dropped
};

struct LossWeights {
  double lambda_w = 0.1;
  double lambda_a = 1.0;
  double lambda_g = 10.0;
  double margin = 0.5;  // radians
  double scale = 64.0;
  std::size_t n_age_bins = 16;
  double age_max = 80.0;

  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Additive angular margin softmax over unit-norm embeddings [n x d] and
/// unit-norm class weights [C x d]. Throws ValueError on non-unit rows
/// (tolerance 1e-6) or labels outside [0, C).
ad::Var margin_softmax_loss(const ad::Var& embeddings, const ad::Var& class_weights,
                            std::span<const int> labels, double scale, double margin);

/// Bin index floor(age / (age_max / n_bins)), clipped to the last bin.
/// Throws ValueError for negative or non-finite ages.
int age_bin(double age, double age_max, std::size_t n_bins);

/// Cross-entropy of the single-layer age head against binned ages.
ad::Var age_loss(const ad::Var& age_embeddings, const ad::Var& head_weight, const ad::Var& head_bias,
                 std::span<const double> ages, double age_max, std::size_t n_bins);

/// mean(joint) - mean(product).
ad::Var wasserstein_loss(const ad::Var& joint_scores, const ad::Var& product_scores);
double wasserstein_loss(std::span<const double> joint_scores, std::span<const double> product_scores);

/// Row-wise interpolates eps_i * joint_i + (1 - eps_i) * product_i with
/// eps_i ~ U[0, 1) drawn from `seed`.
Tensor interpolate(const Tensor& joint, const Tensor& product, std::uint64_t seed);

/// mean_i (|grad_x critic(x~_i)| - 1)^2 at the seeded interpolates, recorded
/// in `graph` so its parameter gradient is available through ad::grad.
ad::Var gradient_penalty(ad::Graph& graph, const std::function<ad::Var(const ad::Var&)>& critic,
                         const Tensor& joint, const Tensor& product, std::uint64_t seed);

/// 1/2 mean log(1 - D(joint)) + 1/2 mean log D(product). Values must lie in
/// [0, 1]; exact 0 or 1 is floored at 1e-12 inside the log and reported via
/// `clamped`. Anything outside [0, 1] throws ValueError.
ad::Var jsd_discriminator_loss(const ad::Var& d_joint, const ad::Var& d_product, bool* clamped = nullptr);
double jsd_discriminator_loss(std::span<const double> d_joint, std::span<const double> d_product,
                              bool* clamped = nullptr);

/// log 2 + discriminator loss, clamped to [0, log 2].
double jsd_estimate(std::span<const double> d_joint, std::span<const double> d_product);

/// L_id + lambda_w L_w + lambda_a L_a; the pretrained mode drops L_a.
ad::Var total_loss(const ad::Var& l_id, const ad::Var& l_w, const ad::Var& l_a, const LossWeights& w,
                   AgeMode mode);
double total_loss(double l_id, double l_w, double l_a, const LossWeights& w, AgeMode mode);

}  // namespace wmi::losses
