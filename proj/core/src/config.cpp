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

#include "wmi/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <vector>

#include "wmi/errors.hpp"

namespace wmi {
namespace {

struct Field {
  std::string_view section;
  std::string_view key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("expected a number, got '" + std::string(s) + "'");
  return v;
}

std::uint64_t parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

template <typename T>
Field num(std::string_view section, std::string_view key, T TrainConfig::*member) {
  return {section, key,
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          },
          [member](TrainConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) c.*member = parse_double(v);
            else c.*member = static_cast<T>(parse_uint(v));
          }};
}

template <typename T>
Field loss(std::string_view key, T losses::LossWeights::*member) {
  return {"loss", key,
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.weights.*member);
            else return std::to_string(c.weights.*member);
          },
          [member](TrainConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) c.weights.*member = parse_double(v);
            else c.weights.*member = static_cast<T>(parse_uint(v));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      num("model", "d_id", &TrainConfig::d_id),
      num("model", "d_a", &TrainConfig::d_a),
      loss("lambda_w", &losses::LossWeights::lambda_w),
      loss("lambda_a", &losses::LossWeights::lambda_a),
      loss("lambda_g", &losses::LossWeights::lambda_g),
      loss("margin", &losses::LossWeights::margin),
      loss("scale", &losses::LossWeights::scale),
      loss("n_age_bins", &losses::LossWeights::n_age_bins),
      loss("age_max", &losses::LossWeights::age_max),
      num("optim", "lr_encoder", &TrainConfig::lr_encoder),
      num("optim", "lr_age", &TrainConfig::lr_age),
      num("optim", "lr_critic", &TrainConfig::lr_critic),
      num("optim", "momentum", &TrainConfig::momentum),
      num("optim", "weight_decay", &TrainConfig::weight_decay),
      num("optim", "rms_alpha", &TrainConfig::rms_alpha),
      num("optim", "rms_eps", &TrainConfig::rms_eps),
      {"optim", "lr_decay",
       [](const TrainConfig& c) { return std::string(c.lr_decay == LrDecay::kLinear ? "linear" : "constant"); },
       [](TrainConfig& c, std::string_view v) {
         if (v == "linear") c.lr_decay = LrDecay::kLinear;
         else if (v == "constant") c.lr_decay = LrDecay::kConstant;
         else throw ConfigError("lr_decay must be linear or constant, got '" + std::string(v) + "'");
       }},
      num("schedule", "steps", &TrainConfig::steps),
      num("schedule", "batch_size", &TrainConfig::batch_size),
      num("schedule", "n_critic", &TrainConfig::n_critic),
      {"schedule", "critic", [](const TrainConfig& c) { return std::string(c.critic ? "true" : "false"); },
       [](TrainConfig& c, std::string_view v) { c.critic = parse_bool(v); }},
      num("probe", "every", &TrainConfig::probe_every),
      num("probe", "steps", &TrainConfig::probe_steps),
      num("probe", "samples", &TrainConfig::probe_samples),
      num("probe", "lr", &TrainConfig::probe_lr),
      num("seeds", "params", &TrainConfig::seed_params),
      num("seeds", "data", &TrainConfig::seed_data),
      num("seeds", "shuffle", &TrainConfig::seed_shuffle),
      {"train", "mode", [](const TrainConfig& c) { return std::string(mode_name(c.mode)); },
       [](TrainConfig& c, std::string_view v) { c.mode = parse_mode(v); }},
  };
  return all;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

const Field& find(std::string_view section, std::string_view key) {
  for (const Field& f : fields()) {
    if (f.section == section && f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(section) + "." + std::string(key) + "'");
}

}  // namespace

std::string_view mode_name(losses::AgeMode m) noexcept {
  return m == losses::AgeMode::kSupervised ? "supervised" : "pretrained";
}

losses::AgeMode parse_mode(std::string_view s) {
  if (s == "supervised") return losses::AgeMode::kSupervised;
  if (s == "pretrained") return losses::AgeMode::kPretrained;
  throw ConfigError("mode must be supervised or pretrained, got '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  try {
    weights.validate();
  } catch (const ValueError& e) {
    throw ConfigError(e.what());
  }
  if (d_id == 0 || d_a == 0) throw ConfigError("model.d_id and model.d_a must be positive");
  if (!(lr_encoder > 0.0) || !(lr_age > 0.0) || !(lr_critic > 0.0) || !(probe_lr > 0.0)) {
    throw ConfigError("learning rates must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
  if (!(rms_alpha >= 0.0 && rms_alpha < 1.0)) throw ConfigError("optim.rms_alpha must be in [0, 1)");
  if (!(rms_eps > 0.0)) throw ConfigError("optim.rms_eps must be > 0");
  if (steps == 0) throw ConfigError("schedule.steps must be >= 1");
  if (batch_size < 2) throw ConfigError("schedule.batch_size must be >= 2");
  if (n_critic == 0) throw ConfigError("schedule.n_critic must be >= 1");
  if (probe_every == 0 || probe_steps == 0) throw ConfigError("probe.every and probe.steps must be >= 1");
  if (probe_samples < 8) throw ConfigError("probe.samples must be >= 8");
}

TrainConfig fast_preset() {
  TrainConfig c;
  c.steps = 200;
  c.batch_size = 64;
  c.n_critic = 5;
  c.probe_every = 50;
  c.probe_steps = 100;
  c.probe_samples = 512;
  return c;
}

std::string config_to_text(const TrainConfig& c) {
  std::ostringstream out;
  std::string_view section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(c) << '\n';
  }
  return out.str();
}

TrainConfig config_from_text(std::string_view text, TrainConfig base) {
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header");
        section = std::string(trim(line.substr(1, line.size() - 2)));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'");
      if (section.empty()) throw ConfigError("key outside of a [section]");
      find(section, trim(line.substr(0, eq))).set(base, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_text(ss.str());
}

void set_config_value(TrainConfig& c, std::string_view dotted_key, std::string_view value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string_view::npos) throw ConfigError("config key must look like section.key");
  find(dotted_key.substr(0, dot), dotted_key.substr(dot + 1)).set(c, value);
}

std::string config_hash(const TrainConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : config_to_text(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

}  // namespace wmi
