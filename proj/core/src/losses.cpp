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

#include "wmi/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "wmi/errors.hpp"
#include "wmi/rng.hpp"

namespace wmi::losses {
namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kLogFloor = 1e-12;

void require_unit_rows(const char* what, const Tensor& t) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double s = 0.0;
    for (double v : t.row(r)) s += v * v;
    if (std::abs(std::sqrt(s) - 1.0) > kUnitTolerance) {
      throw ValueError(std::string("margin_softmax_loss: ") + what + " row " + std::to_string(r) +
                       " has norm " + std::to_string(std::sqrt(s)) + ", expected 1");
    }
  }
}

void require_probabilities(const char* what, std::span<const double> v, bool& clamped) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw ValueError(std::string("jsd_discriminator_loss: ") + what + "[" + std::to_string(i) +
                       "] = " + std::to_string(v[i]) + " is outside (0, 1)");
    }
    if (v[i] < kLogFloor || 1.0 - v[i] < kLogFloor) clamped = true;
  }
}

// log(max(x, floor)) with the floor applied through a constant offset, so the
// gradient path stays the identity on the offset entries.
ad::Var floored_log(const ad::Var& x) {
  Tensor offset(x.shape());
  bool any = false;
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    if (x.value()[i] < kLogFloor) {
      offset[i] = kLogFloor - x.value()[i];
      any = true;
    }
  }
  return ad::log(any ? ad::add(x, x.graph().constant(std::move(offset))) : x);
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_w >= 0.0) || !(lambda_a >= 0.0) || !(lambda_g >= 0.0)) {
    throw ValueError("loss weights must be non-negative");
  }
  if (!(margin >= 0.0)) throw ValueError("margin must be >= 0");
  if (!(scale > 0.0)) throw ValueError("scale must be > 0");
  if (n_age_bins == 0) throw ValueError("n_age_bins must be positive");
  if (!(age_max > 0.0)) throw ValueError("age_max must be positive");
}

ad::Var margin_softmax_loss(const ad::Var& embeddings, const ad::Var& class_weights,
                            std::span<const int> labels, double scale, double margin) {
  require_unit_rows("embedding", embeddings.value());
  require_unit_rows("class weight", class_weights.value());
  const ad::Var cosines = ad::matmul_nt(embeddings, class_weights);
  const ad::Var logits = ad::scale(ad::arc_margin(cosines, labels, margin), scale);
  return ad::softmax_xent(logits, labels);
}

int age_bin(double age, double age_max, std::size_t n_bins) {
  if (!(age >= 0.0) || !std::isfinite(age)) {
    throw ValueError("age_loss: age " + std::to_string(age) + " is negative or non-finite");
  }
  const double width = age_max / static_cast<double>(n_bins);
  const auto bin = static_cast<std::size_t>(std::floor(age / width));
  return static_cast<int>(std::min(bin, n_bins - 1));
}

ad::Var age_loss(const ad::Var& age_embeddings, const ad::Var& head_weight, const ad::Var& head_bias,
                 std::span<const double> ages, double age_max, std::size_t n_bins) {
  if (ages.size() != age_embeddings.shape().rows) {
    throw ShapeError("age_loss", age_embeddings.shape().str(), "ages[" + std::to_string(ages.size()) + "]");
  }
  if (head_weight.shape().cols != n_bins) {
    throw ShapeError("age_loss", head_weight.shape().str(), "[d_a x " + std::to_string(n_bins) + "]");
  }
  std::vector<int> bins(ages.size());
  for (std::size_t i = 0; i < ages.size(); ++i) bins[i] = age_bin(ages[i], age_max, n_bins);
  const ad::Var logits = ad::add_row(ad::matmul(age_embeddings, head_weight), head_bias);
  return ad::softmax_xent(logits, bins);
}

ad::Var wasserstein_loss(const ad::Var& joint_scores, const ad::Var& product_scores) {
  return ad::sub(ad::mean(joint_scores), ad::mean(product_scores));
}

double wasserstein_loss(std::span<const double> joint, std::span<const double> product) {
  if (joint.empty() || product.empty()) throw ValueError("wasserstein_loss: empty batch");
  double sj = 0.0, sp = 0.0;
  for (double v : joint) sj += v;
  for (double v : product) sp += v;
  return sj / static_cast<double>(joint.size()) - sp / static_cast<double>(product.size());
}

Tensor interpolate(const Tensor& joint, const Tensor& product, std::uint64_t seed) {
  if (joint.shape() != product.shape()) {
    throw ShapeError("gradient_penalty", joint.shape().str(), product.shape().str());
  }
  Rng rng(seed);
  Tensor out(joint.shape());
  for (std::size_t r = 0; r < joint.rows(); ++r) {
    const double eps = rng.uniform();
    for (std::size_t c = 0; c < joint.cols(); ++c) {
      out(r, c) = eps * joint(r, c) + (1.0 - eps) * product(r, c);
    }
  }
  return out;
}

ad::Var gradient_penalty(ad::Graph& graph, const std::function<ad::Var(const ad::Var&)>& critic,
                         const Tensor& joint, const Tensor& product, std::uint64_t seed) {
  const ad::Var x = graph.leaf(interpolate(joint, product, seed));
  return ad::gradient_penalty_term(critic, x);
}

ad::Var jsd_discriminator_loss(const ad::Var& d_joint, const ad::Var& d_product, bool* clamped) {
  bool flag = false;
  require_probabilities("D(joint)", d_joint.value().data(), flag);
  require_probabilities("D(product)", d_product.value().data(), flag);
  if (clamped != nullptr) *clamped = flag;
  const ad::Var one_minus = ad::add_scalar(ad::scale(d_joint, -1.0), 1.0);
  return ad::add(ad::scale(ad::mean(floored_log(one_minus)), 0.5),
                 ad::scale(ad::mean(floored_log(d_product)), 0.5));
}

double jsd_discriminator_loss(std::span<const double> d_joint, std::span<const double> d_product, bool* clamped) {
  if (d_joint.empty() || d_product.empty()) throw ValueError("jsd_discriminator_loss: empty batch");
  bool flag = false;
  require_probabilities("D(joint)", d_joint, flag);
  require_probabilities("D(product)", d_product, flag);
  if (clamped != nullptr) *clamped = flag;
  double sj = 0.0, sp = 0.0;
  for (double v : d_joint) sj += std::log(std::max(1.0 - v, kLogFloor));
  for (double v : d_product) sp += std::log(std::max(v, kLogFloor));
  return 0.5 * sj / static_cast<double>(d_joint.size()) + 0.5 * sp / static_cast<double>(d_product.size());
}

double jsd_estimate(std::span<const double> d_joint, std::span<const double> d_product) {
  const double v = std::numbers::ln2 + jsd_discriminator_loss(d_joint, d_product);
  return std::clamp(v, 0.0, std::numbers::ln2);
}

ad::Var total_loss(const ad::Var& l_id, const ad::Var& l_w, const ad::Var& l_a, const LossWeights& w,
                   AgeMode mode) {
  ad::Var total = ad::add(l_id, ad::scale(l_w, w.lambda_w));
  if (mode == AgeMode::kSupervised) total = ad::add(total, ad::scale(l_a, w.lambda_a));
  return total;
}

double total_loss(double l_id, double l_w, double l_a, const LossWeights& w, AgeMode mode) {
  double total = l_id + w.lambda_w * l_w;
  if (mode == AgeMode::kSupervised) total += w.lambda_a * l_a;
  return total;
}

}  // namespace wmi::losses
