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

// wmi: data generation, training, evaluation and ablation runs.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmi/checkpoint.hpp"
#include "wmi/config.hpp"
#include "wmi/errors.hpp"
#include "wmi/evalsuite.hpp"
#include "wmi/synthdata.hpp"
#include "wmi/trainer.hpp"

#ifndef WMI_VERSION
#define WMI_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Raised for bad flag combinations that CLI11 cannot see.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr const char* kTrainFile = "train.bin";
constexpr const char* kEvalFile = "eval.bin";
constexpr const char* kFoldsFile = "folds.jsonl";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw wmi::Error("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw wmi::Error("cannot create output directory " + dir.string());
}

// A dataset flag names either a file or a gen-data directory.
fs::path data_file(const fs::path& p, const char* inside) {
  return fs::is_directory(p) ? p / inside : p;
}

// Manifest: written when a command starts and rewritten when it ends.
class Manifest {
 public:
  Manifest(fs::path dir, std::string command, const std::vector<std::string>& argv)
      : path_(std::move(dir) / "manifest.json"), start_(std::chrono::steady_clock::now()) {
    doc_["tool"] = "wmi";
    doc_["version"] = WMI_VERSION;
    doc_["command"] = std::move(command);
    doc_["argv"] = argv;
    doc_["output_dir"] = fs::absolute(path_.parent_path()).string();
  }

  json& operator[](const char* key) { return doc_[key]; }

  void config(const wmi::TrainConfig& c) {
    doc_["config"] = wmi::config_to_text(c);
    doc_["config_hash"] = wmi::config_hash(c);
    doc_["seeds"] = {{"params", c.seed_params}, {"data", c.seed_data}, {"shuffle", c.seed_shuffle}};
  }

  void write(const char* status) {
    doc_["status"] = status;
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    doc_["wall_seconds"] = dt.count();
    write_text(path_, doc_.dump(2) + "\n");
  }

 private:
  fs::path path_;
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

// Runs `body`, finalizing the manifest as ok or failed.
template <class F>
void with_manifest(Manifest& m, F&& body) {
  m.write("running");
  try {
    body();
  } catch (...) {
    m.write("failed");
    throw;
  }
  m.write("ok");
}

struct ConfigFlags {
  std::string path;
  std::vector<std::string> overrides;
  std::string preset = "default";

  void add(CLI::App* app) {
    app->add_option("--config", path, "config file ([section] key = value)");
    app->add_option("--set", overrides, "override, e.g. --set loss.lambda_w=0.1")->take_all();
    app->add_option("--preset", preset, "base values before --config")->check(CLI::IsMember({"default", "fast"}));
  }

  wmi::TrainConfig load() const {
    wmi::TrainConfig c = preset == "fast" ? wmi::fast_preset() : wmi::TrainConfig{};
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw wmi::ConfigError("cannot read config " + path);
      std::string text((std::istreambuf_iterator<char>(in)), {});
      c = wmi::config_from_text(text, c);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw wmi::ConfigError("--set expects key=value, got '" + kv + "'");
      wmi::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

std::string describe(const wmi::eval::VerificationReport& r) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "accuracy %.4f +- %.4f over %zu folds", r.mean, r.stddev, r.fold_accuracy.size());
  return buf;
}

int run(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Age-invariant embedding training on synthetic faces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", WMI_VERSION);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate train/eval datasets and verification folds");
  std::uint64_t seed = 7;
  std::size_t identities = 200, images = 30, eval_identities = 100;
  double window = 10.0;
  std::string out;
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--identities", identities, "training identities");
  gen->add_option("--images-per-id", images, "images per identity");
  gen->add_option("--eval-identities", eval_identities, "held-out identities for verification");
  gen->add_option("--train-age-window", window, "per-identity age span of training images (years)");
  gen->add_option("--out", out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train the encoders");
  ConfigFlags tr_cfg;
  tr_cfg.add(tr);
  std::string data, mode, pretrained;
  tr->add_option("--data", data, "training dataset file or gen-data directory")->required();
  tr->add_option("--out", out, "output directory")->required();
  tr->add_option("--mode", mode, "overrides train.mode")->check(CLI::IsMember({"supervised", "pretrained"}));
  tr->add_option("--pretrained-age", pretrained, "checkpoint supplying f_a / g_a (pretrained mode)");

  // pretrain-age
  auto* pre = app.add_subcommand("pretrain-age", "train the age encoder alone");
  ConfigFlags pre_cfg;
  pre_cfg.add(pre);
  pre->add_option("--data", data, "training dataset file or gen-data directory")->required();
  pre->add_option("--out", out, "output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "cross-age verification and age leakage");
  std::string ckpt_path, folds_path;
  ev->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  ev->add_option("--data", data, "evaluation dataset file or gen-data directory")->required();
  ev->add_option("--folds", folds_path, "folds file (default: folds.jsonl next to the data)");
  ev->add_option("--out", out, "output directory")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "sweep lambda_w");
  ConfigFlags ab_cfg;
  ab_cfg.add(ab);
  std::string grid = "0,0.1,1.0,2.0";
  ab->add_option("--data", data, "gen-data directory")->required();
  ab->add_option("--grid", grid, "comma-separated lambda_w values");
  ab->add_option("--out", out, "output directory")->required();

  // jsd-curve
  auto* jc = app.add_subcommand("jsd-curve", "extract the probe series from a metrics log");
  std::string metrics;
  jc->add_option("--metrics", metrics, "metrics.csv")->required();
  jc->add_option("--out", out, "output directory")->required();

  // print-config
  auto* pc = app.add_subcommand("print-config", "print the effective configuration");
  ConfigFlags pc_cfg;
  pc_cfg.add(pc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*pc) {
    std::cout << wmi::config_to_text(pc_cfg.load());
    return 0;
  }

  if (*gen) {
    if (identities < 2 || eval_identities < 2) throw UsageError("gen-data needs at least 2 identities per set");
    ensure_dir(out);
    Manifest m(out, "gen-data", args);
    m["seeds"] = {{"data", seed}};
    with_manifest(m, [&] {
      wmi::synth::GenerateOptions to;
      to.age_window = window;
      const auto train_set = wmi::synth::generate_dataset(seed, identities, images, to);
      wmi::synth::GenerateOptions eo;
      eo.identity_offset = identities;
      const auto eval_set = wmi::synth::generate_dataset(seed, eval_identities, images, eo);
      const auto folds = wmi::synth::build_folds(eval_set, {}, wmi::derive_seed(seed, {0x666f6c6473ULL}));
      wmi::synth::save_dataset(train_set, fs::path(out) / kTrainFile);
      wmi::synth::save_dataset(eval_set, fs::path(out) / kEvalFile);
      wmi::synth::save_folds(folds, fs::path(out) / kFoldsFile);
      m["dataset_hash"] = {{"train", wmi::synth::dataset_hash(train_set)}, {"eval", wmi::synth::dataset_hash(eval_set)}};
      std::cout << "wrote " << train_set.size() << " training and " << eval_set.size() << " evaluation samples, "
                << folds.n_folds() << " folds\n";
    });
    return 0;
  }

  if (*tr) {
    wmi::TrainConfig cfg = tr_cfg.load();
    if (!mode.empty()) cfg.mode = wmi::parse_mode(mode);
    if (cfg.mode == wmi::losses::AgeMode::kPretrained && pretrained.empty()) {
      throw UsageError("pretrained mode requires --pretrained-age <checkpoint>");
    }
    const auto dataset = wmi::synth::load_dataset(data_file(data, kTrainFile));
    std::optional<wmi::Checkpoint> age_ckpt;
    if (!pretrained.empty()) age_ckpt = wmi::load_checkpoint(pretrained);
    ensure_dir(out);
    Manifest m(out, "train", args);
    m.config(cfg);
    m["dataset_hash"] = wmi::synth::dataset_hash(dataset);
    with_manifest(m, [&] {
      write_text(fs::path(out) / "config.toml", wmi::config_to_text(cfg));
      const auto r = wmi::train::train(cfg, dataset, age_ckpt ? &age_ckpt->params : nullptr);
      wmi::train::write_metrics_csv(r.rows, fs::path(out) / "metrics.csv");
      wmi::save_checkpoint(wmi::train::to_checkpoint(r.state, cfg), fs::path(out) / "checkpoint.json");
      m["final_jsd"] = r.final_jsd;
      std::cout << cfg.steps << " steps, final L_id " << r.rows.back().l_id << ", final jsd " << r.final_jsd << "\n";
    });
    return 0;
  }

  if (*pre) {
    const wmi::TrainConfig cfg = pre_cfg.load();
    const auto dataset = wmi::synth::load_dataset(data_file(data, kTrainFile));
    ensure_dir(out);
    Manifest m(out, "pretrain-age", args);
    m.config(cfg);
    m["dataset_hash"] = wmi::synth::dataset_hash(dataset);
    with_manifest(m, [&] {
      const auto r = wmi::train::pretrain_age_encoder(dataset, cfg);
      std::string csv = "step,L_a\n";
      for (std::size_t i = 0; i < r.l_a.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, r.l_a[i]);
        csv += buf;
      }
      write_text(fs::path(out) / "pretrain.csv", csv);
      wmi::save_checkpoint(wmi::train::to_checkpoint(r.state, cfg), fs::path(out) / "checkpoint.json");
      m["age_bin_accuracy"] = wmi::train::age_bin_accuracy(r.state, dataset, cfg);
      std::cout << "final L_a " << r.l_a.back() << "\n";
    });
    return 0;
  }

  if (*ev) {
    const auto ckpt = wmi::load_checkpoint(ckpt_path);
    const auto dataset = wmi::synth::load_dataset(data_file(data, kEvalFile));
    if (folds_path.empty()) folds_path = ((fs::is_directory(data) ? fs::path(data) : fs::path(data).parent_path()) / kFoldsFile).string();
    const auto folds = wmi::synth::load_folds(folds_path);
    ensure_dir(out);
    Manifest m(out, "eval", args);
    m["dataset_hash"] = wmi::synth::dataset_hash(dataset);
    m["checkpoint_config_hash"] = ckpt.config_hash;
    with_manifest(m, [&] {
      const auto report = wmi::eval::cosine_verify(folds, dataset, ckpt);
      const double r2 = wmi::eval::age_leakage_probe(ckpt, dataset);
      write_text(fs::path(out) / "verify_report.json", wmi::eval::report_json(report, r2));
      std::cout << describe(report) << ", age leakage R^2 " << r2 << "\n";
    });
    return 0;
  }

  if (*ab) {
    const wmi::TrainConfig cfg = ab_cfg.load();
    const auto values = wmi::eval::parse_grid(grid);
    const auto train_set = wmi::synth::load_dataset(fs::path(data) / kTrainFile);
    const auto eval_set = wmi::synth::load_dataset(fs::path(data) / kEvalFile);
    const auto folds = wmi::synth::load_folds(fs::path(data) / kFoldsFile);
    ensure_dir(out);
    Manifest m(out, "ablate", args);
    m.config(cfg);
    m["grid"] = values;
    m["dataset_hash"] = {{"train", wmi::synth::dataset_hash(train_set)}, {"eval", wmi::synth::dataset_hash(eval_set)}};
    bool all_ok = true;
    with_manifest(m, [&] {
      const auto rows = wmi::eval::run_ablation(
          cfg, values, {&train_set, &eval_set, &folds},
          [&](const wmi::eval::AblationRow& row, const wmi::train::TrainResult* r) {
            char tag[32];
            std::snprintf(tag, sizeof(tag), "lambda_w_%g", row.lambda_w);
            if (r) wmi::train::write_metrics_csv(r->rows, fs::path(out) / (std::string("metrics_") + tag + ".csv"));
            if (row.ok) {
              std::cout << tag << ": " << describe(row.report) << ", final jsd " << row.final_jsd << ", age R^2 "
                        << row.age_r2 << std::endl;
            } else {
              std::cerr << tag << ": failed: " << row.error << std::endl;
            }
          });
      wmi::eval::write_ablation_csv(rows, fs::path(out) / "ablation.csv");
      std::vector<wmi::eval::NamedCurve> curves;
      for (const auto& row : rows) {
        all_ok = all_ok && row.ok;
        char label[32];
        std::snprintf(label, sizeof(label), "lambda_w=%g", row.lambda_w);
        if (row.ok) curves.push_back({label, row.curve});
      }
      write_text(fs::path(out) / "jsd_curves.svg", wmi::eval::curve_svg(curves, "JSD probe during training"));
    });
    return all_ok ? 0 : 1;
  }

  if (*jc) {
    const auto curve = wmi::eval::jsd_curve(fs::path(metrics));
    ensure_dir(out);
    wmi::eval::write_curve_csv(curve, fs::path(out) / "jsd_curve.csv");
    write_text(fs::path(out) / "jsd_curve.svg", wmi::eval::curve_svg({{"jsd", curve}}, "JSD probe during training"));
    std::cout << curve.size() << " probe points\n";
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "wmi: " << e.what() << "\n";
    return 2;
  } catch (const wmi::ConfigError& e) {
    std::cerr << "wmi: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "wmi: " << e.what() << "\n";
    return 1;
  }
}
