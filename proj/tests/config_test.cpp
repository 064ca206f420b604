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

#include <string>

#include "doctest.h"
#include "wmi/config.hpp"
#include "wmi/errors.hpp"

using namespace wmi;

TEST_CASE("config: defaults print and parse back to the same config") {
  const TrainConfig def;
  const std::string text = config_to_text(def);
  CHECK(text.find("[loss]") != std::string::npos);
  CHECK(text.find("lambda_g = 10") != std::string::npos);
  CHECK(text.find("n_critic = 50") != std::string::npos);
  CHECK(text.find("mode = supervised") != std::string::npos);
  CHECK(config_from_text(text) == def);

  TrainConfig odd = fast_preset();
  odd.weights.lambda_w = 0.1 + 0.2;  // not exactly representable in short decimal form
  odd.mode = losses::AgeMode::kPretrained;
  odd.lr_decay = LrDecay::kConstant;
  odd.critic = false;
  CHECK(config_from_text(config_to_text(odd)) == odd);
}

TEST_CASE("config: partial files override defaults; comments and blanks are ignored") {
  const TrainConfig c = config_from_text("# run\n[loss]\nlambda_w = 2   # strong\n\n[schedule]\nsteps = 7\n");
  CHECK(c.weights.lambda_w == 2.0);
  CHECK(c.steps == 7);
  CHECK(c.n_critic == TrainConfig{}.n_critic);
}

TEST_CASE("config: errors carry the line number") {
  auto message = [](const char* text) {
    try {
      config_from_text(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("[loss]\nlambda_q = 1\n").find("line 2") != std::string::npos);
  CHECK(message("[loss]\nlambda_w = abc\n").find("line 2") != std::string::npos);
  CHECK(message("lambda_w = 1\n").find("line 1") != std::string::npos);
  CHECK(message("[train]\nmode = sometimes\n").find("line 2") != std::string::npos);
  CHECK(message("[schedule]\nn_critic = 0\n").find("n_critic") != std::string::npos);
  CHECK(message("[optim]\nlr_encoder = -1\n") != "no error");
}

TEST_CASE("config: dotted setter and hash") {
  TrainConfig c;
  const std::string h = config_hash(c);
  CHECK(h.size() == 16);
  set_config_value(c, "loss.lambda_w", "1.5");
  CHECK(c.weights.lambda_w == 1.5);
  CHECK(config_hash(c) != h);
  CHECK_THROWS_AS(set_config_value(c, "lambda_w", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "loss.nope", "1"), ConfigError);
}
