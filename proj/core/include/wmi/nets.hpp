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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wmi/autodiff.hpp"
#include "wmi/tensor.hpp"

namespace wmi::nets {

enum class Activation { kTanh, kLeakyRelu };

std::string_view activation_name(Activation a) noexcept;
Activation parse_activation(std::string_view name);

/// Dense network shape. `widths` lists input, hidden and output sizes, so a
/// valid spec has at least three entries.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::kTanh;
  bool normalize_output = false;
  double leaky_slope = 0.2;

  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t layers() const { return widths.size() - 1; }
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// All network shapes of a model. Defaults are the desk-scale sizes.
struct Architecture {
  std::size_t d_x = 32;
  std::size_t d_id = 16;
  std::size_t d_a = 8;
  std::size_t n_identities = 200;
  std::size_t n_age_bins = 16;
  MlpSpec id_encoder{{32, 64, 64, 16}, Activation::kTanh, true};
  MlpSpec age_encoder{{32, 32, 8}, Activation::kTanh, true};
  MlpSpec critic{{24, 64, 32, 1}, Activation::kLeakyRelu, false};
  MlpSpec probe{{24, 64, 32, 1}, Activation::kLeakyRelu, false};

  /// Rebuilds the four specs from the scalar dimensions.
  static Architecture make(std::size_t d_x, std::size_t d_id, std::size_t d_a, std::size_t n_identities,
                           std::size_t n_age_bins);
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Network prefixes used as parameter-name namespaces.
inline constexpr std::string_view kIdEncoder = "f_id";
inline constexpr std::string_view kAgeEncoder = "f_a";
inline constexpr std::string_view kIdHead = "g_id";
inline constexpr std::string_view kAgeHead = "g_a";
inline constexpr std::string_view kCritic = "critic";
inline constexpr std::string_view kProbe = "probe";

/// Named parameter tensors; names are "<net>.<tensor>", e.g. "f_id.W0".
class ModelParams {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  void set(std::string name, Tensor value) { tensors_[std::move(name)] = std::move(value); }
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);
  bool contains(std::string_view name) const { return tensors_.find(name) != tensors_.end(); }

  /// Names belonging to one network, in sorted order.
  std::vector<std::string> names(std::string_view net) const;
  /// Copies every tensor of `net` from `other`, replacing existing ones.
  void assign_net(std::string_view net, const ModelParams& other);
  /// Bit-exact equality of all tensors of one network.
  bool net_equals(std::string_view net, const ModelParams& other) const;

  const Map& all() const noexcept { return tensors_; }
  Map& all() noexcept { return tensors_; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  Map tensors_;
};

/// Parameters placed into a graph, either as tracked leaves or constants.
class Bound {
 public:
  Bound() = default;
  /// Binds the networks in `nets`; those listed in `tracked` become leaves.
  Bound(ad::Graph& graph, const ModelParams& params, const std::vector<std::string_view>& nets,
        const std::vector<std::string_view>& tracked);

  const ad::Var& operator[](std::string_view name) const;
  /// Vars of one network in the same order as ModelParams::names(net).
  std::vector<ad::Var> vars(std::string_view net) const;
  std::vector<std::string> names(std::string_view net) const;

 private:
  std::map<std::string, ad::Var, std::less<>> vars_;
};

/// Generic MLP forward pass over the parameters "<net>.W<i>", "<net>.b<i>".
ad::Var mlp_forward(const MlpSpec& spec, const Bound& params, std::string_view net, const ad::Var& x);

/// Identity embedding, unit-norm rows [n x d_id].
ad::Var encode_id(const ad::Var& x, const Bound& params, const Architecture& arch);
/// Attribute (age) embedding, unit-norm rows [n x d_a].
ad::Var encode_age(const ad::Var& x, const Bound& params, const Architecture& arch);
/// Unbounded Wasserstein critic scores [n x 1].
ad::Var critic_score(const ad::Var& pair, const Bound& params, const Architecture& arch);
/// Probe discriminator probabilities in (0, 1), [n x 1].
ad::Var jsd_discriminator_score(const ad::Var& pair, const Bound& params, const Architecture& arch);
/// Identity logits of the margin head: cosines between embeddings and the
/// normalized class-weight rows, [n x C].
ad::Var id_head_cosines(const ad::Var& id_embedding, const Bound& params);
/// Age-bin logits of the single fully connected head, [n x n_age_bins].
ad::Var age_head_logits(const ad::Var& age_embedding, const Bound& params);

/// Value-level helpers (build a throwaway graph of constants).
Tensor embed_id(const Tensor& x, const ModelParams& params, const Architecture& arch);
Tensor embed_age(const Tensor& x, const ModelParams& params, const Architecture& arch);

/// Random MLP parameters: weights ~ N(0, 1/fan_in), zero biases.
void init_mlp(const MlpSpec& spec, std::string_view net, std::uint64_t seed, ModelParams& out);
/// Full model. Deterministic in `seed`; each network uses its own sub-stream.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

}  // namespace wmi::nets
