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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wmi/rng.hpp"
#include "wmi/tensor.hpp"

namespace wmi::synth {

inline constexpr std::uint32_t kGeneratorVersion = 1;
inline constexpr std::size_t kLatentDim = 8;
inline constexpr std::size_t kAgeFeatures = 3;
inline constexpr std::size_t kMixHidden = 64;
inline constexpr double kAgeMax = 80.0;
inline constexpr double kNoise = 0.05;

/// Fixed generative network x = tanh(W2 tanh(W1 [u; phi(a)] + b1) + b2).
struct Mixing {
  Tensor w1;  // [(latent + 3) x hidden]
  Tensor b1;  // [1 x hidden]
  Tensor w2;  // [hidden x d_x]
  Tensor b2;  // [1 x d_x]
};

Mixing mixing_params(std::uint64_t seed, std::size_t d_x);

/// phi(a) = [a/80, sin(pi a/40), cos(pi a/40)].
std::array<double, kAgeFeatures> age_features(double age);

/// Latent u_c ~ N(0, I) for a global identity index.
std::vector<double> identity_latent(std::uint64_t seed, std::size_t identity);

/// Noise-free generator output for one (latent, age).
std::vector<double> render(const Mixing& mix, std::span<const double> latent, double age);

struct Dataset {
  std::uint64_t seed = 0;
  std::size_t n_identities = 0;
  std::size_t images_per_identity = 0;
  std::size_t identity_offset = 0;  // first global identity index
  std::size_t d_x = 32;
  double age_window = kAgeMax;      // width of each identity's age range
  std::uint32_t version = kGeneratorVersion;
  Tensor x;                     // [N x d_x]
  std::vector<int> identity;    // global identity index per row
  std::vector<double> age;

  std::size_t size() const noexcept { return identity.size(); }
  /// Identity as a class label in [0, n_identities).
  int label(std::size_t row) const { return identity[row] - static_cast<int>(identity_offset); }
  Dataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct GenerateOptions {
  std::size_t identity_offset = 0;
  std::size_t d_x = 32;
  /// Each identity's ages are U[lo_c, lo_c + window] with lo_c ~ U[0, 80 - window].
  /// The full window 80 gives a ~ U[0, 80] for every image.
  double age_window = kAgeMax;
};

/// C identities x K images. Identities occupy global indices
/// [identity_offset, identity_offset + C), so sets generated with the same
/// seed and disjoint offsets share the mixing network but no subjects.
Dataset generate_dataset(std::uint64_t seed, std::size_t n_identities, std::size_t images_per_identity,
                         const GenerateOptions& opt = {});

void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
/// FNV-1a over the serialized bytes.
std::string dataset_hash(const Dataset& d);

struct Pair {
  std::size_t a = 0;
  std::size_t b = 0;
  bool same = false;
  double age_a = 0.0;
  double age_b = 0.0;
  std::size_t fold = 0;

  friend bool operator==(const Pair&, const Pair&) = default;
};

struct PairFolds {
  std::vector<std::vector<Pair>> folds;

  std::size_t n_folds() const noexcept { return folds.size(); }
  friend bool operator==(const PairFolds&, const PairFolds&) = default;
};

struct FoldSpec {
  std::size_t n_folds = 10;
  double min_gap = 30.0;       // positives: |age_a - age_b| >= min_gap
  double negative_gap = 10.0;  // negatives: |age_a - age_b| <= negative_gap
  std::size_t pairs = 300;     // positives per fold (negatives likewise)
};

/// Identity-disjoint folds of cross-age positives and age-matched negatives.
/// Throws ValueError naming the first fold that cannot supply enough pairs.
PairFolds build_folds(const Dataset& d, const FoldSpec& spec, std::uint64_t seed);

void save_folds(const PairFolds& f, const std::filesystem::path& path);
PairFolds load_folds(const std::filesystem::path& path);

/// Product-distribution rows concat(id_i, age_perm(i)) for a seeded
/// derangement `perm`.
struct ShuffledPairs {
  Tensor pairs;
  std::vector<std::size_t> perm;
};

ShuffledPairs shuffle_pairs(const Tensor& id_embeddings, const Tensor& age_embeddings, std::uint64_t seed);
/// Rows of `t` reordered as t[perm[i]].
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> perm);

struct Batch {
  Tensor x;
  std::vector<int> labels;
  std::vector<double> ages;
  std::vector<std::size_t> rows;
};

/// One epoch of seeded mini-batches; the final partial batch is dropped.
class BatchIter {
 public:
  BatchIter(const Dataset& d, std::size_t batch_size, std::uint64_t epoch_seed);

  bool next(Batch& out);
  std::size_t batches() const noexcept { return order_.size() / batch_; }

 private:
  const Dataset* data_;
  std::size_t batch_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

Batch make_batch(const Dataset& d, std::span<const std::size_t> rows);

}  // namespace wmi::synth
