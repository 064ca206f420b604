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

#include "wmi/nets.hpp"

#include <cmath>

#include "wmi/errors.hpp"
#include "wmi/rng.hpp"

namespace wmi::nets {
namespace {

std::string param_name(std::string_view net, char kind, std::size_t layer) {
  return std::string(net) + "." + kind + std::to_string(layer);
}

bool in_net(std::string_view name, std::string_view net) {
  return name.size() > net.size() && name.substr(0, net.size()) == net && name[net.size()] == '.';
}

std::uint64_t net_tag(std::string_view net) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : net) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

void check_input(const char* op, const ad::Var& x, std::size_t expected) {
  if (x.shape().cols != expected) {
    throw ShapeError(op, x.shape().str(), "[n x " + std::to_string(expected) + "]");
  }
}

}  // namespace

std::string_view activation_name(Activation a) noexcept {
  return a == Activation::kTanh ? "tanh" : "leaky_relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  throw FormatError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
  if (widths.size() < 3) throw ValueError("MlpSpec needs at least one hidden layer");
  for (std::size_t w : widths) {
    if (w == 0) throw ValueError("MlpSpec widths must be positive");
  }
}

Architecture Architecture::make(std::size_t d_x, std::size_t d_id, std::size_t d_a, std::size_t n_identities,
                                std::size_t n_age_bins) {
  Architecture a;
  a.d_x = d_x;
  a.d_id = d_id;
  a.d_a = d_a;
  a.n_identities = n_identities;
  a.n_age_bins = n_age_bins;
  a.id_encoder.widths = {d_x, 64, 64, d_id};
  a.age_encoder.widths = {d_x, 32, d_a};
  a.critic.widths = {d_id + d_a, 64, 32, 1};
  a.probe.widths = {d_id + d_a, 64, 32, 1};
  return a;
}

void Architecture::validate() const {
  id_encoder.validate();
  age_encoder.validate();
  critic.validate();
  probe.validate();
  if (id_encoder.input_dim() != d_x || age_encoder.input_dim() != d_x) {
    throw ValueError("encoder input widths must equal d_x");
  }
  if (id_encoder.output_dim() != d_id || age_encoder.output_dim() != d_a) {
    throw ValueError("encoder output widths must equal d_id / d_a");
  }
  if (critic.output_dim() != 1 || probe.output_dim() != 1) throw ValueError("critic and probe emit one score");
  if (n_identities == 0 || n_age_bins == 0) throw ValueError("class counts must be positive");
}

const Tensor& ModelParams::at(std::string_view name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ValueError("missing parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor& ModelParams::at(std::string_view name) {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ValueError("missing parameter '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> ModelParams::names(std::string_view net) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : tensors_) {
    if (in_net(name, net)) out.push_back(name);
  }
  return out;
}

void ModelParams::assign_net(std::string_view net, const ModelParams& other) {
  for (const auto& name : names(net)) tensors_.erase(name);
  for (const auto& name : other.names(net)) tensors_[name] = other.at(name);
}

bool ModelParams::net_equals(std::string_view net, const ModelParams& other) const {
  const auto mine = names(net);
  if (mine != other.names(net)) return false;
  for (const auto& name : mine) {
    if (!(at(name) == other.at(name))) return false;
  }
  return true;
}

Bound::Bound(ad::Graph& graph, const ModelParams& params, const std::vector<std::string_view>& nets,
             const std::vector<std::string_view>& tracked) {
  for (std::string_view net : nets) {
    bool track = false;
    for (std::string_view t : tracked) track = track || t == net;
    for (const auto& name : params.names(net)) {
      vars_[name] = track ? graph.leaf(params.at(name)) : graph.constant(params.at(name));
    }
  }
}

const ad::Var& Bound::operator[](std::string_view name) const {
  const auto it = vars_.find(name);
  if (it == vars_.end()) throw ValueError("parameter '" + std::string(name) + "' is not bound");
  return it->second;
}

std::vector<std::string> Bound::names(std::string_view net) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : vars_) {
    if (in_net(name, net)) out.push_back(name);
  }
  return out;
}

std::vector<ad::Var> Bound::vars(std::string_view net) const {
  std::vector<ad::Var> out;
  for (const auto& [name, v] : vars_) {
    if (in_net(name, net)) out.push_back(v);
  }
  return out;
}

ad::Var mlp_forward(const MlpSpec& spec, const Bound& params, std::string_view net, const ad::Var& x) {
  check_input("mlp_forward", x, spec.input_dim());
  ad::Var h = x;
  for (std::size_t layer = 0; layer < spec.layers(); ++layer) {
    h = ad::add_row(ad::matmul(h, params[param_name(net, 'W', layer)]), params[param_name(net, 'b', layer)]);
    if (layer + 1 < spec.layers()) {
      h = spec.activation == Activation::kTanh ? ad::tanh(h) : ad::leaky_relu(h, spec.leaky_slope);
    }
  }
  return spec.normalize_output ? ad::l2_normalize(h) : h;
}

ad::Var encode_id(const ad::Var& x, const Bound& params, const Architecture& arch) {
  check_input("encode_id", x, arch.d_x);
  return mlp_forward(arch.id_encoder, params, kIdEncoder, x);
}

ad::Var encode_age(const ad::Var& x, const Bound& params, const Architecture& arch) {
  check_input("encode_age", x, arch.d_x);
  return mlp_forward(arch.age_encoder, params, kAgeEncoder, x);
}

ad::Var critic_score(const ad::Var& pair, const Bound& params, const Architecture& arch) {
  check_input("critic_score", pair, arch.critic.input_dim());
  return mlp_forward(arch.critic, params, kCritic, pair);
}

ad::Var jsd_discriminator_score(const ad::Var& pair, const Bound& params, const Architecture& arch) {
  check_input("jsd_discriminator_score", pair, arch.probe.input_dim());
  return ad::sigmoid(mlp_forward(arch.probe, params, kProbe, pair));
}

ad::Var id_head_cosines(const ad::Var& id_embedding, const Bound& params) {
  const ad::Var w = ad::l2_normalize(params[std::string(kIdHead) + ".W"]);
  return ad::matmul_nt(id_embedding, w);
}

ad::Var age_head_logits(const ad::Var& age_embedding, const Bound& params) {
  const std::string net(kAgeHead);
  return ad::add_row(ad::matmul(age_embedding, params[net + ".W"]), params[net + ".b"]);
}

Tensor embed_id(const Tensor& x, const ModelParams& params, const Architecture& arch) {
  ad::Graph g;
  const Bound b(g, params, {kIdEncoder}, {});
  return encode_id(g.constant(x), b, arch).value();
}

Tensor embed_age(const Tensor& x, const ModelParams& params, const Architecture& arch) {
  ad::Graph g;
  const Bound b(g, params, {kAgeEncoder}, {});
  return encode_age(g.constant(x), b, arch).value();
}

void init_mlp(const MlpSpec& spec, std::string_view net, std::uint64_t seed, ModelParams& out) {
  spec.validate();
  Rng rng(derive_seed(seed, {net_tag(net)}));
  for (std::size_t layer = 0; layer < spec.layers(); ++layer) {
    const std::size_t fan_in = spec.widths[layer], fan_out = spec.widths[layer + 1];
    Tensor w(Shape{fan_in, fan_out});
    const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.data()) v = rng.normal(0.0, sd);
    out.set(param_name(net, 'W', layer), std::move(w));
    out.set(param_name(net, 'b', layer), Tensor(Shape{1, fan_out}, 0.0));
  }
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p;
  init_mlp(arch.id_encoder, kIdEncoder, seed, p);
  init_mlp(arch.age_encoder, kAgeEncoder, seed, p);
  init_mlp(arch.critic, kCritic, seed, p);
  init_mlp(arch.probe, kProbe, seed, p);

  Rng head_rng(derive_seed(seed, {net_tag(kIdHead)}));
  Tensor w_id(Shape{arch.n_identities, arch.d_id});
  for (double& v : w_id.data()) v = head_rng.normal();
  p.set(std::string(kIdHead) + ".W", std::move(w_id));

  Rng age_rng(derive_seed(seed, {net_tag(kAgeHead)}));
  Tensor w_a(Shape{arch.d_a, arch.n_age_bins});
  const double sd = 1.0 / std::sqrt(static_cast<double>(arch.d_a));
  for (double& v : w_a.data()) v = age_rng.normal(0.0, sd);
  p.set(std::string(kAgeHead) + ".W", std::move(w_a));
  p.set(std::string(kAgeHead) + ".b", Tensor(Shape{1, arch.n_age_bins}, 0.0));
  return p;
}

}  // namespace wmi::nets
