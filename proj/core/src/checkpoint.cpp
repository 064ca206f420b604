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

#include "wmi/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "wmi/errors.hpp"

namespace wmi {
namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "wmi-checkpoint";
constexpr int kVersion = 1;

json spec_to_json(const nets::MlpSpec& s) {
  return json{{"widths", s.widths},
              {"activation", nets::activation_name(s.activation)},
              {"normalize_output", s.normalize_output},
              {"leaky_slope", s.leaky_slope}};
}

nets::MlpSpec spec_from_json(const json& j) {
  nets::MlpSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.activation = nets::parse_activation(j.at("activation").get<std::string>());
  s.normalize_output = j.at("normalize_output").get<bool>();
  s.leaky_slope = j.at("leaky_slope").get<double>();
  s.validate();
  return s;
}

json params_to_json(const nets::ModelParams& p) {
  json out = json::object();
  for (const auto& [name, t] : p.all()) {
    out[name] = json{{"shape", {t.rows(), t.cols()}},
                     {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  }
  return out;
}

nets::ModelParams params_from_json(const json& j) {
  nets::ModelParams p;
  for (const auto& [name, entry] : j.items()) {
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw FormatError("checkpoint: parameter '" + name + "' must have a 2-d shape");
    p.set(name, Tensor(Shape{shape[0], shape[1]}, entry.at("data").get<std::vector<double>>()));
  }
  return p;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config_hash"] = c.config_hash;
  j["architecture"] = json{{"d_x", c.arch.d_x},
                           {"d_id", c.arch.d_id},
                           {"d_a", c.arch.d_a},
                           {"n_identities", c.arch.n_identities},
                           {"n_age_bins", c.arch.n_age_bins},
                           {"id_encoder", spec_to_json(c.arch.id_encoder)},
                           {"age_encoder", spec_to_json(c.arch.age_encoder)},
                           {"critic", spec_to_json(c.arch.critic)},
                           {"probe", spec_to_json(c.arch.probe)}};
  j["params"] = params_to_json(c.params);
  j["optimizer"] = params_to_json(c.optimizer);
  return j.dump(1);
}

Checkpoint checkpoint_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw FormatError("checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kVersion) throw FormatError("checkpoint: unsupported version");
    Checkpoint c;
    c.config_hash = j.at("config_hash").get<std::string>();
    const json& a = j.at("architecture");
    c.arch.d_x = a.at("d_x").get<std::size_t>();
    c.arch.d_id = a.at("d_id").get<std::size_t>();
    c.arch.d_a = a.at("d_a").get<std::size_t>();
    c.arch.n_identities = a.at("n_identities").get<std::size_t>();
    c.arch.n_age_bins = a.at("n_age_bins").get<std::size_t>();
    c.arch.id_encoder = spec_from_json(a.at("id_encoder"));
    c.arch.age_encoder = spec_from_json(a.at("age_encoder"));
    c.arch.critic = spec_from_json(a.at("critic"));
    c.arch.probe = spec_from_json(a.at("probe"));
    c.arch.validate();
    c.params = params_from_json(j.at("params"));
    c.optimizer = params_from_json(j.at("optimizer"));
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt) << '\n';
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace wmi
