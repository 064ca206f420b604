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

#include "wmi/synthdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "wmi/errors.hpp"

namespace wmi::synth {
namespace {

static_assert(std::endian::native == std::endian::little, "dataset files are little-endian");

constexpr char kMagic[8] = {'W', 'M', 'I', 'S', 'Y', 'N', 'T', 'H'};
constexpr std::uint64_t kMixingTag = 0x6d6978;      // "mix"
constexpr std::uint64_t kLatentTag = 0x6c6174;      // "lat"
constexpr std::uint64_t kImageTag = 0x696d67;       // "img"
constexpr std::uint64_t kRangeTag = 0x726e67;       // "rng"
// Age features enter the first layer with this gain so that age dominates a
// visible share of the mixture next to the 8 identity dimensions.
constexpr double kAgeGain = 2.5;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("dataset file truncated at byte " + std::to_string(pos));
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string serialize(const Dataset& d) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, d.version);
  put<std::uint64_t>(out, d.seed);
  put<std::uint64_t>(out, d.n_identities);
  put<std::uint64_t>(out, d.images_per_identity);
  put<std::uint64_t>(out, d.d_x);
  put<std::uint64_t>(out, d.identity_offset);
  put<double>(out, d.age_window);
  for (std::size_t i = 0; i < d.size(); ++i) {
    put<std::int32_t>(out, d.identity[i]);
    put<double>(out, d.age[i]);
    for (double v : d.x.row(i)) put<double>(out, v);
  }
  return out;
}

Tensor gaussian(Shape s, double sd, Rng& rng) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.normal(0.0, sd);
  return t;
}

}  // namespace

Mixing mixing_params(std::uint64_t seed, std::size_t d_x) {
  Rng rng(derive_seed(seed, {kMixingTag}));
  constexpr std::size_t in = kLatentDim + kAgeFeatures;
  Mixing m;
  m.w1 = gaussian({in, kMixHidden}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  for (std::size_t r = kLatentDim; r < in; ++r) {
    for (std::size_t c = 0; c < kMixHidden; ++c) m.w1(r, c) *= kAgeGain;
  }
  m.b1 = gaussian({1, kMixHidden}, 0.1, rng);
  m.w2 = gaussian({kMixHidden, d_x}, 1.0 / std::sqrt(static_cast<double>(kMixHidden)), rng);
  m.b2 = gaussian({1, d_x}, 0.1, rng);
  return m;
}

std::array<double, kAgeFeatures> age_features(double age) {
  const double t = std::numbers::pi * age / 40.0;
  return {age / kAgeMax, std::sin(t), std::cos(t)};
}

std::vector<double> identity_latent(std::uint64_t seed, std::size_t identity) {
  Rng rng(derive_seed(seed, {kLatentTag, identity}));
  std::vector<double> u(kLatentDim);
  for (double& v : u) v = rng.normal();
  return u;
}

std::vector<double> render(const Mixing& mix, std::span<const double> latent, double age) {
  const auto phi = age_features(age);
  std::vector<double> in(latent.begin(), latent.end());
  in.insert(in.end(), phi.begin(), phi.end());
  std::vector<double> h(kMixHidden);
  for (std::size_t c = 0; c < kMixHidden; ++c) {
    double s = mix.b1[c];
    for (std::size_t r = 0; r < in.size(); ++r) s += in[r] * mix.w1(r, c);
    h[c] = std::tanh(s);
  }
  const std::size_t d_x = mix.w2.cols();
  std::vector<double> x(d_x);
  for (std::size_t c = 0; c < d_x; ++c) {
    double s = mix.b2[c];
    for (std::size_t r = 0; r < kMixHidden; ++r) s += h[r] * mix.w2(r, c);
    x[c] = std::tanh(s);
  }
  return x;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out = *this;
  out.x = Tensor(Shape{rows.size(), d_x});
  out.identity.clear();
  out.age.clear();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.x.row(i).begin());
    out.identity.push_back(identity[rows[i]]);
    out.age.push_back(age[rows[i]]);
  }
  return out;
}

Dataset generate_dataset(std::uint64_t seed, std::size_t n_identities, std::size_t images_per_identity,
                         const GenerateOptions& opt) {
  if (n_identities < 2) throw ValueError("generate_dataset: need at least 2 identities");
  if (images_per_identity < 2) throw ValueError("generate_dataset: need at least 2 images per identity");
  if (opt.d_x == 0) throw ValueError("generate_dataset: d_x must be positive");
  if (!(opt.age_window > 0.0 && opt.age_window <= kAgeMax)) {
    throw ValueError("generate_dataset: age window must be in (0, 80]");
  }
  const std::size_t d_x = opt.d_x;
  const Mixing mix = mixing_params(seed, d_x);
  Dataset d;
  d.seed = seed;
  d.n_identities = n_identities;
  d.images_per_identity = images_per_identity;
  d.identity_offset = opt.identity_offset;
  d.d_x = d_x;
  d.age_window = opt.age_window;
  d.x = Tensor(Shape{n_identities * images_per_identity, d_x});
  std::size_t row = 0;
  for (std::size_t c = 0; c < n_identities; ++c) {
    const std::size_t global = opt.identity_offset + c;
    const auto u = identity_latent(seed, global);
    double lo = 0.0;
    if (opt.age_window < kAgeMax) {
      Rng range_rng(derive_seed(seed, {kRangeTag, global}));
      lo = range_rng.uniform(0.0, kAgeMax - opt.age_window);
    }
    for (std::size_t k = 0; k < images_per_identity; ++k, ++row) {
      Rng rng(derive_seed(seed, {kImageTag, global, k}));
      const double a = lo + rng.uniform(0.0, opt.age_window);
      const auto clean = render(mix, u, a);
      auto dst = d.x.row(row);
      for (std::size_t j = 0; j < d_x; ++j) dst[j] = clean[j] + kNoise * rng.normal();
      d.identity.push_back(static_cast<int>(global));
      d.age.push_back(a);
    }
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write dataset file " + path.string());
  const std::string bytes = serialize(d);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing dataset file " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read dataset file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + " is not a dataset file");
  }
  std::size_t pos = sizeof(kMagic);
  Dataset d;
  d.version = take<std::uint32_t>(bytes, pos);
  if (d.version != kGeneratorVersion) {
    throw FormatError("dataset generator version " + std::to_string(d.version) + " is not supported");
  }
  d.seed = take<std::uint64_t>(bytes, pos);
  d.n_identities = take<std::uint64_t>(bytes, pos);
  d.images_per_identity = take<std::uint64_t>(bytes, pos);
  d.d_x = take<std::uint64_t>(bytes, pos);
  d.identity_offset = take<std::uint64_t>(bytes, pos);
  d.age_window = take<double>(bytes, pos);
  const std::size_t n = d.n_identities * d.images_per_identity;
  const std::size_t record = sizeof(std::int32_t) + sizeof(double) * (1 + d.d_x);
  if (d.d_x == 0 || n == 0 || !(d.age_window > 0.0) || bytes.size() - pos != n * record) {
    throw FormatError("dataset file " + path.string() + " has inconsistent size");
  }
  d.x = Tensor(Shape{n, d.d_x});
  for (std::size_t i = 0; i < n; ++i) {
    d.identity.push_back(take<std::int32_t>(bytes, pos));
    d.age.push_back(take<double>(bytes, pos));
    for (double& v : d.x.row(i)) v = take<double>(bytes, pos);
  }
  return d;
}

std::string dataset_hash(const Dataset& d) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : serialize(d)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

PairFolds build_folds(const Dataset& d, const FoldSpec& spec, std::uint64_t seed) {
  if (spec.n_folds < 2) throw ValueError("build_folds: need at least 2 folds");
  if (spec.pairs == 0) throw ValueError("build_folds: pairs per fold must be positive");
  const std::set<int> unique(d.identity.begin(), d.identity.end());
  std::vector<int> ids(unique.begin(), unique.end());
  if (ids.size() < 2 * spec.n_folds) {
    throw ValueError("build_folds: " + std::to_string(ids.size()) + " identities cannot fill " +
                     std::to_string(spec.n_folds) + " folds with negatives (need >= 2 per fold)");
  }
  Rng rng(seed);
  rng.shuffle(std::span<int>(ids));
  std::map<int, std::size_t> fold_of;
  for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = i % spec.n_folds;

  std::vector<std::vector<std::size_t>> members(spec.n_folds);
  for (std::size_t r = 0; r < d.size(); ++r) members[fold_of.at(d.identity[r])].push_back(r);

  PairFolds out;
  out.folds.resize(spec.n_folds);
  for (std::size_t f = 0; f < spec.n_folds; ++f) {
    std::vector<Pair> pos, neg;
    const auto& rows = members[f];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        const std::size_t a = rows[i], b = rows[j];
        const double gap = std::abs(d.age[a] - d.age[b]);
        const Pair p{a, b, d.identity[a] == d.identity[b], d.age[a], d.age[b], f};
        if (p.same && gap >= spec.min_gap) pos.push_back(p);
        if (!p.same && gap <= spec.negative_gap) neg.push_back(p);
      }
    }
    if (pos.size() < spec.pairs || neg.size() < spec.pairs) {
      throw ValueError("build_folds: fold " + std::to_string(f) + " has " + std::to_string(pos.size()) +
                       " cross-age positives and " + std::to_string(neg.size()) +
                       " age-matched negatives, need " + std::to_string(spec.pairs) + " of each");
    }
    Rng fold_rng(derive_seed(seed, {f}));
    fold_rng.shuffle(std::span<Pair>(pos));
    fold_rng.shuffle(std::span<Pair>(neg));
    auto& dst = out.folds[f];
    dst.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(spec.pairs));
    dst.insert(dst.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(spec.pairs));
  }
  return out;
}

void save_folds(const PairFolds& folds, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write folds file " + path.string());
  for (const auto& fold : folds.folds) {
    for (const Pair& p : fold) {
      const nlohmann::ordered_json j = {{"idx_a", p.a},     {"idx_b", p.b},     {"label", p.same ? 1 : 0},
                                        {"age_a", p.age_a}, {"age_b", p.age_b}, {"fold", p.fold}};
      f << j.dump() << '\n';
    }
  }
  if (!f) throw Error("failed writing folds file " + path.string());
}

PairFolds load_folds(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read folds file " + path.string());
  PairFolds out;
  std::string line;
  for (std::size_t n = 1; std::getline(f, line); ++n) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Pair p{j.at("idx_a").get<std::size_t>(), j.at("idx_b").get<std::size_t>(), j.at("label").get<int>() == 1,
             j.at("age_a").get<double>(),      j.at("age_b").get<double>(),      j.at("fold").get<std::size_t>()};
      if (p.fold >= out.folds.size()) out.folds.resize(p.fold + 1);
      out.folds[p.fold].push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  if (out.folds.empty()) throw FormatError(path.string() + " contains no pairs");
  return out;
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> perm) {
  Tensor out(Shape{perm.size(), t.cols()});
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto src = t.row(perm[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

ShuffledPairs shuffle_pairs(const Tensor& id_embeddings, const Tensor& age_embeddings, std::uint64_t seed) {
  const std::size_t n = id_embeddings.rows();
  if (age_embeddings.rows() != n) {
    throw ShapeError("shuffle_pairs", id_embeddings.shape().str(), age_embeddings.shape().str());
  }
  if (n < 2) throw ValueError("shuffle_pairs: need at least 2 rows for a derangement");
  Rng rng(seed);
  ShuffledPairs out;
  out.perm = random_derangement(n, rng);
  const std::size_t d_id = id_embeddings.cols(), d_a = age_embeddings.cols();
  out.pairs = Tensor(Shape{n, d_id + d_a});
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.pairs.row(i);
    const auto id = id_embeddings.row(i);
    const auto age = age_embeddings.row(out.perm[i]);
    std::copy(id.begin(), id.end(), dst.begin());
    std::copy(age.begin(), age.end(), dst.begin() + static_cast<std::ptrdiff_t>(d_id));
  }
  return out;
}

Batch make_batch(const Dataset& d, std::span<const std::size_t> rows) {
  Batch b;
  b.x = gather_rows(d.x, rows);
  b.rows.assign(rows.begin(), rows.end());
  for (std::size_t r : rows) {
    b.labels.push_back(d.label(r));
    b.ages.push_back(d.age[r]);
  }
  return b;
}

BatchIter::BatchIter(const Dataset& d, std::size_t batch_size, std::uint64_t epoch_seed)
    : data_(&d), batch_(batch_size), order_(d.size()) {
  if (batch_size == 0 || batch_size > d.size()) {
    throw ValueError("batch size " + std::to_string(batch_size) + " must be in [1, " + std::to_string(d.size()) +
                     "]");
  }
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng(epoch_seed);
  rng.shuffle(std::span<std::size_t>(order_));
}

bool BatchIter::next(Batch& out) {
  if (cursor_ + batch_ > order_.size()) return false;
  out = make_batch(*data_, std::span<const std::size_t>(order_).subspan(cursor_, batch_));
  cursor_ += batch_;
  return true;
}

}  // namespace wmi::synth
