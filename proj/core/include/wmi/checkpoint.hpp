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

#include <filesystem>
#include <string>
#include <string_view>

#include "wmi/nets.hpp"

namespace wmi {

/// Self-describing model container: architecture, named parameters, optional
/// optimizer buffers and the hash of the config that produced it.
struct Checkpoint {
  nets::Architecture arch;
  nets::ModelParams params;
  nets::ModelParams optimizer;
  std::string config_hash;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// JSON text. Doubles are written in shortest round-trip form, so
/// serialize -> parse is bit-exact.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wmi
