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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmi/checkpoint.hpp"
#include "wmi/config.hpp"
#include "wmi/synthdata.hpp"
#include "wmi/trainer.hpp"

namespace wmi::eval {

struct ScoredPair {
  double similarity = 0.0;
  bool same = false;
};

struct VerificationReport {
  std::vector<double> fold_accuracy;
  std::vector<double> thresholds;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over folds
};

/// Threshold maximizing accuracy of "same iff similarity >= t" over the
/// candidates {min - 1, midpoints of consecutive distinct values, max + 1};
/// ties go to the smallest threshold.
double best_threshold(std::span<const ScoredPair> pairs);

double accuracy_at(std::span<const ScoredPair> pairs, double threshold);

/// Leave-one-fold-out protocol: each fold is scored with the threshold
/// chosen on the union of the other folds.
VerificationReport verify_scored(const std::vector<std::vector<ScoredPair>>& folds);

/// Cosine similarities of embedding rows for every pair of every fold.
std::vector<std::vector<ScoredPair>> score_folds(const synth::PairFolds& folds, const Tensor& embeddings);

VerificationReport cosine_verify(const synth::PairFolds& folds, const Tensor& embeddings);
VerificationReport cosine_verify(const synth::PairFolds& folds, const synth::Dataset& data, const Checkpoint& ckpt);

/// Ridge regression with an unpenalized intercept, solved through the normal
/// equations. Returns d + 1 coefficients, intercept last.
std::vector<double> ridge_fit(const Tensor& features, std::span<const double> target, double ridge);
double r_squared(const Tensor& features, std::span<const double> target, std::span<const double> coef);

struct LeakageOptions {
  double ridge = 1e-3;
  std::uint64_t seed = 0;  // train / held-out split
};

/// R^2 on a held-out half of a linear age regressor fit on the other half.
double age_leakage_probe(const Tensor& embeddings, std::span<const double> ages, const LeakageOptions& opt = {});
double age_leakage_probe(const Checkpoint& ckpt, const synth::Dataset& data, const LeakageOptions& opt = {});

struct CurvePoint {
  std::size_t step = 0;
  double jsd = 0.0;
};

/// Probe series of a metrics CSV. Throws FormatError with the line number on
/// malformed input, and on a log without any probe rows.
std::vector<CurvePoint> jsd_curve(std::string_view csv_text);
std::vector<CurvePoint> jsd_curve(const std::filesystem::path& metrics_csv);
std::vector<CurvePoint> jsd_curve(const std::vector<train::MetricsRow>& rows);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);

struct NamedCurve {
  std::string label;
  std::vector<CurvePoint> points;
};
/// Line plot of one or more curves as standalone SVG markup.
std::string curve_svg(const std::vector<NamedCurve>& curves, std::string_view title);

struct AblationRow {
  double lambda_w = 0.0;
  bool ok = false;
  std::string error;
  VerificationReport report;
  double final_jsd = 0.0;
  double age_r2 = 0.0;
  std::vector<CurvePoint> curve;
};

/// Comma-separated, finite, unique values. Throws ConfigError otherwise.
std::vector<double> parse_grid(std::string_view text);

struct AblationInputs {
  const synth::Dataset* train = nullptr;
  const synth::Dataset* eval = nullptr;
  const synth::PairFolds* folds = nullptr;
};

using RowCallback = std::function<void(const AblationRow&, const train::TrainResult*)>;

/// One run per lambda_w with everything else identical. A failing run is
/// reported in its row; the remaining rows still run.
std::vector<AblationRow> run_ablation(const TrainConfig& base, std::span<const double> grid, const AblationInputs& in,
                                      const RowCallback& on_row = {});

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);
std::string report_json(const VerificationReport& r, double age_r2);

}  // namespace wmi::eval
