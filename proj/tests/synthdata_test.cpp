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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "wmi/errors.hpp"
#include "wmi/evalsuite.hpp"
#include "wmi/synthdata.hpp"

using namespace wmi;
using namespace wmi::synth;

namespace {

std::filesystem::path temp_file(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("generate_dataset: same seed gives a bit-identical dataset, other seeds differ") {
  const Dataset a = generate_dataset(5, 6, 4);
  const Dataset b = generate_dataset(5, 6, 4);
  CHECK(a == b);
  CHECK(dataset_hash(a) == dataset_hash(b));
  CHECK_FALSE(generate_dataset(6, 6, 4) == a);
  CHECK(a.size() == 24);
  CHECK(a.x.cols() == 32);
  CHECK(a.x.all_finite());
  for (double age : a.age) {
    CHECK(age >= 0.0);
    CHECK(age <= 80.0);
  }
}

TEST_CASE("generate_dataset: preconditions") {
  CHECK_THROWS_AS(generate_dataset(1, 1, 5), ValueError);
  CHECK_THROWS_AS(generate_dataset(1, 5, 1), ValueError);
  GenerateOptions o;
  o.age_window = 0.0;
  CHECK_THROWS_AS(generate_dataset(1, 5, 5, o), ValueError);
}

TEST_CASE("generate_dataset: identity offset keeps the mixing network and separates subjects") {
  GenerateOptions o;
  o.identity_offset = 10;
  const Dataset d = generate_dataset(3, 4, 3, o);
  CHECK(*std::min_element(d.identity.begin(), d.identity.end()) == 10);
  CHECK(d.label(0) == 0);
  CHECK(d.label(d.size() - 1) == 3);
  // Same global identity and image index render the same sample.
  const Dataset base = generate_dataset(3, 14, 3);
  CHECK(std::equal(d.x.row(0).begin(), d.x.row(0).end(), base.x.row(30).begin()));
}

TEST_CASE("generate_dataset: per-identity age window") {
  GenerateOptions o;
  o.age_window = 12.0;
  const Dataset d = generate_dataset(8, 40, 10, o);
  std::map<int, std::pair<double, double>> range;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto [it, fresh] = range.try_emplace(d.identity[i], d.age[i], d.age[i]);
    it->second.first = std::min(it->second.first, d.age[i]);
    it->second.second = std::max(it->second.second, d.age[i]);
    CHECK(d.age[i] >= 0.0);
    CHECK(d.age[i] <= 80.0);
  }
  for (const auto& [id, r] : range) CHECK(r.second - r.first <= 12.0);
}

TEST_CASE("generate_dataset: two renders of one identity at one age differ only by noise") {
  const Mixing mix = mixing_params(21, 32);
  Rng rng(99);
  const double bound = kNoise * (2.0 * std::sqrt(32.0) + 1.0);
  int within = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto u = identity_latent(21, static_cast<std::size_t>(trial));
    const double age = rng.uniform(0.0, 80.0);
    const auto clean = render(mix, u, age);
    double d2 = 0.0;
    for (double c : clean) {
      (void)c;
      const double diff = kNoise * rng.normal() - kNoise * rng.normal();
      d2 += diff * diff;
    }
    within += std::sqrt(d2) <= bound;
  }
  CHECK(within == 1000);
}

TEST_CASE("generate_dataset: age is linearly recoverable from x (R^2 > 0.8)") {
  for (std::uint64_t seed : {1, 7, 11}) {
    const Dataset d = generate_dataset(seed, 200, 30);
    const double r2 = eval::age_leakage_probe(d.x, d.age, {1e-3, seed});
    CHECK(r2 > 0.8);
  }
}

TEST_CASE("dataset file: round trip, hash and corruption") {
  GenerateOptions o;
  o.age_window = 25.0;
  o.identity_offset = 3;
  const Dataset d = generate_dataset(4, 5, 3, o);
  const auto path = temp_file("wmi_synth_roundtrip.bin");
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(back == d);
  CHECK(dataset_hash(back) == dataset_hash(d));

  std::string bytes;
  {
    std::ifstream f(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  {
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
  }
  CHECK_THROWS_AS(load_dataset(path), FormatError);
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a dataset";
  }
  CHECK_THROWS_AS(load_dataset(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("build_folds: contract scan on the default protocol") {
  GenerateOptions o;
  o.identity_offset = 200;
  const Dataset d = generate_dataset(7, 100, 30, o);
  const FoldSpec spec;
  const PairFolds f = build_folds(d, spec, 11);
  REQUIRE(f.n_folds() == 10);
  std::vector<std::set<int>> ids(10);
  for (std::size_t k = 0; k < 10; ++k) {
    std::size_t pos = 0, neg = 0;
    for (const Pair& p : f.folds[k]) {
      CHECK(p.fold == k);
      CHECK(p.age_a == d.age[p.a]);
      CHECK(p.age_b == d.age[p.b]);
      ids[k].insert(d.identity[p.a]);
      ids[k].insert(d.identity[p.b]);
      if (p.same) {
        ++pos;
        CHECK(d.identity[p.a] == d.identity[p.b]);
        CHECK(std::abs(d.age[p.a] - d.age[p.b]) >= 30.0);
      } else {
        ++neg;
        CHECK(d.identity[p.a] != d.identity[p.b]);
        CHECK(std::abs(d.age[p.a] - d.age[p.b]) <= 10.0);
      }
    }
    CHECK(pos == 300);
    CHECK(neg == 300);
  }
  for (std::size_t a = 0; a < 10; ++a) {
    for (std::size_t b = a + 1; b < 10; ++b) {
      std::vector<int> common;
      std::set_intersection(ids[a].begin(), ids[a].end(), ids[b].begin(), ids[b].end(), std::back_inserter(common));
      CHECK(common.empty());
    }
  }
  CHECK(build_folds(d, spec, 11) == f);
  CHECK_FALSE(build_folds(d, spec, 12) == f);
}

TEST_CASE("build_folds: infeasible protocols name the fold") {
  const Dataset narrow = [] {
    GenerateOptions o;
    o.age_window = 10.0;
    return generate_dataset(2, 40, 10, o);
  }();
  try {
    build_folds(narrow, {}, 1);
    FAIL("expected an infeasible fold");
  } catch (const ValueError& e) {
    CHECK(std::string(e.what()).find("fold 0") != std::string::npos);
  }
  CHECK_THROWS_AS(build_folds(generate_dataset(2, 10, 30), {}, 1), ValueError);
}

TEST_CASE("folds file: JSONL round trip") {
  const Dataset d = generate_dataset(3, 40, 20);
  FoldSpec spec;
  spec.pairs = 20;
  const PairFolds f = build_folds(d, spec, 5);
  const auto path = temp_file("wmi_folds_roundtrip.jsonl");
  save_folds(f, path);
  CHECK(load_folds(path) == f);
  {
    std::ofstream out(path);
    out << "{\"idx_a\": 1}\n";
  }
  CHECK_THROWS_AS(load_folds(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("shuffle_pairs: derangement, row multiset, determinism") {
  Rng rng(3);
  for (std::size_t n = 2; n <= 1024; n += (n < 64 ? 1 : 37)) {
    Tensor id(Shape{n, 2}), age(Shape{n, 3});
    for (std::size_t i = 0; i < n; ++i) {
      id(i, 0) = static_cast<double>(i);
      age(i, 0) = static_cast<double>(i);
      age(i, 1) = rng.uniform();
    }
    const auto s = shuffle_pairs(id, age, n);
    std::vector<double> seen;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.perm[i] != i);
      CHECK(s.pairs(i, 0) == static_cast<double>(i));
      CHECK(s.pairs(i, 2) == static_cast<double>(s.perm[i]));
      CHECK(s.pairs(i, 3) == age(s.perm[i], 1));
      seen.push_back(s.pairs(i, 2));
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(seen[i] == static_cast<double>(i));
    CHECK(shuffle_pairs(id, age, n).perm == s.perm);
  }
  CHECK_THROWS_AS(shuffle_pairs(Tensor(Shape{1, 2}), Tensor(Shape{1, 2}), 0), ValueError);
  CHECK_THROWS_AS(shuffle_pairs(Tensor(Shape{3, 2}), Tensor(Shape{4, 2}), 0), ShapeError);
}

TEST_CASE("BatchIter: coverage, drop-last, seeds") {
  const Dataset d = generate_dataset(2, 7, 5);  // 35 samples
  auto collect = [&](std::uint64_t seed) {
    BatchIter it(d, 8, seed);
    std::vector<std::size_t> rows;
    Batch b;
    while (it.next(b)) {
      CHECK(b.x.rows() == 8);
      for (std::size_t i = 0; i < 8; ++i) {
        CHECK(b.labels[i] == d.label(b.rows[i]));
        CHECK(b.ages[i] == d.age[b.rows[i]]);
        CHECK(std::equal(b.x.row(i).begin(), b.x.row(i).end(), d.x.row(b.rows[i]).begin()));
      }
      rows.insert(rows.end(), b.rows.begin(), b.rows.end());
    }
    return rows;
  };
  const auto a = collect(1);
  CHECK(a.size() == 32);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 32);
  CHECK(collect(1) == a);
  CHECK(collect(2) != a);
  CHECK_THROWS_AS(BatchIter(d, 36, 0), ValueError);
  CHECK_THROWS_AS(BatchIter(d, 0, 0), ValueError);
}
