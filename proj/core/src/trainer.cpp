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

#include "wmi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "wmi/errors.hpp"
#include "wmi/losses.hpp"
#include "wmi/rng.hpp"

namespace wmi::train {
namespace {

constexpr std::uint64_t kCriticTag = 0x63726974;   // "crit"
constexpr std::uint64_t kInterpTag = 0x696e7470;   // "intp"
constexpr std::uint64_t kEncoderTag = 0x656e63;    // "enc"
constexpr std::uint64_t kEpochTag = 0x65706f63;    // "epoc"
constexpr std::uint64_t kProbeTag = 0x70726f62;    // "prob"

using nets::kAgeEncoder;
using nets::kAgeHead;
using nets::kCritic;
using nets::kIdEncoder;
using nets::kIdHead;

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out(Shape{a.rows(), a.cols() + b.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

Tensor row_range(const Tensor& t, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> rows(end - begin);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
  return synth::gather_rows(t, rows);
}

std::vector<std::size_t> checked_derangement(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto perm = random_derangement(n, rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (perm[i] == i) throw GraphError("product batch contains a joint pair at row " + std::to_string(i));
  }
  return perm;
}

void require_finite(double v, const char* what, std::size_t step) {
  if (!std::isfinite(v)) throw NonFiniteError(what, step);
}

void require_finite(const nets::ModelParams& p, std::size_t step) {
  for (const auto& [name, t] : p.all()) {
    if (!t.all_finite()) throw NonFiniteError(name, step);
  }
}

// Normalized outputs of diverged weights: the squared norm overflows and the
// row collapses to zero (or NaN) instead of unit length.
void require_unit_rows(const Tensor& t, const char* what, std::size_t step) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double ss = 0.0;
    for (double v : t.row(r)) ss += v * v;
    if (!(std::abs(ss - 1.0) < 1e-6)) throw NonFiniteError(what, step);
  }
}

void require_frozen(const nets::ModelParams& before, const nets::ModelParams& after,
                    std::initializer_list<std::string_view> frozen, const char* phase) {
  for (std::string_view net : frozen) {
    if (!after.net_equals(net, before)) {
      throw GraphError(std::string(phase) + " modified frozen network '" + std::string(net) + "'");
    }
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

Tensor scores(const nets::ModelParams& params, const nets::MlpSpec& spec, std::string_view net, const Tensor& x) {
  ad::Graph g;
  const nets::Bound b(g, params, {net}, {});
  return nets::mlp_forward(spec, b, net, g.constant(x)).value();
}

}  // namespace

std::string metrics_line(const MetricsRow& r) {
  return std::to_string(r.step) + "," + fmt(r.l_id) + "," + fmt(r.l_a) + "," + fmt(r.l_w) + "," + fmt(r.l_grad) +
         "," + fmt(r.jsd_probe) + "," + fmt(r.lr_encoder);
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write metrics file " + path.string());
  f << kMetricsHeader << '\n';
  for (const auto& r : rows) f << metrics_line(r) << '\n';
  if (!f) throw Error("failed writing metrics file " + path.string());
}

CriticStep critic_losses(const nets::ModelParams& params, const nets::MlpSpec& spec, std::string_view net,
                         const Tensor& joint, const Tensor& product, std::uint64_t interp_seed) {
  ad::Graph g;
  const nets::Bound b(g, params, {net}, {});
  const auto f = [&](const ad::Var& x) { return nets::mlp_forward(spec, b, net, x); };
  const ad::Var l_w = losses::wasserstein_loss(f(g.constant(joint)), f(g.constant(product)));
  const ad::Var l_grad = losses::gradient_penalty(g, f, joint, product, interp_seed);
  return {l_w.value().item(), l_grad.value().item()};
}

CriticStep critic_step(nets::ModelParams& params, const nets::MlpSpec& spec, std::string_view net,
                       const Tensor& joint, const Tensor& product, double lambda_g, std::uint64_t interp_seed,
                       const optim::RmsPropOptions& opt, optim::OptimizerState& state) {
  ad::Graph g;
  const nets::Bound b(g, params, {net}, {net});
  const auto f = [&](const ad::Var& x) { return nets::mlp_forward(spec, b, net, x); };
  const ad::Var l_w = losses::wasserstein_loss(f(g.constant(joint)), f(g.constant(product)));
  const ad::Var l_grad = losses::gradient_penalty(g, f, joint, product, interp_seed);
  // Ascent on L_w - lambda_g L_grad is descent on its negation.
  const ad::Var loss = ad::sub(ad::scale(l_grad, lambda_g), l_w);
  const auto vars = b.vars(net);
  const auto grads = ad::grad_values(loss, vars);
  optim::rmsprop_step(params, b.names(net), grads, opt, state);
  return {l_w.value().item(), l_grad.value().item()};
}

double critic_distance(const nets::ModelParams& params, const nets::MlpSpec& spec, std::string_view net,
                       const Tensor& joint, const Tensor& product) {
  return losses::wasserstein_loss(scores(params, spec, net, joint).data(), scores(params, spec, net, product).data());
}

double fit_jsd_probe(const nets::MlpSpec& spec, const Tensor& joint_train, const Tensor& product_train,
                     const Tensor& joint_test, const Tensor& product_test, const ProbeOptions& opt) {
  constexpr std::string_view net = nets::kProbe;
  nets::ModelParams p;
  nets::init_mlp(spec, net, opt.seed, p);
  optim::OptimizerState state;
  for (std::size_t it = 0; it < opt.steps; ++it) {
    ad::Graph g;
    const nets::Bound b(g, p, {net}, {net});
    const ad::Var dj = ad::sigmoid(nets::mlp_forward(spec, b, net, g.constant(joint_train)));
    const ad::Var dp = ad::sigmoid(nets::mlp_forward(spec, b, net, g.constant(product_train)));
    const ad::Var loss = ad::scale(losses::jsd_discriminator_loss(dj, dp), -1.0);
    optim::rmsprop_step(p, b.names(net), ad::grad_values(loss, b.vars(net)), opt.rms, state);
  }
  auto prob = [&](const Tensor& x) {
    Tensor s = scores(p, spec, net, x);
    for (double& v : s.data()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return s;
  };
  return losses::jsd_estimate(prob(joint_test).data(), prob(product_test).data());
}

nets::Architecture architecture_for(const TrainConfig& cfg, const synth::Dataset& data) {
  return nets::Architecture::make(data.d_x, cfg.d_id, cfg.d_a, data.n_identities, cfg.weights.n_age_bins);
}

TrainState init_state(const TrainConfig& cfg, const synth::Dataset& data, const nets::ModelParams* pretrained_age) {
  cfg.validate();
  TrainState s;
  s.arch = architecture_for(cfg, data);
  s.params = nets::init_params(s.arch, cfg.seed_params);
  if (cfg.mode == losses::AgeMode::kPretrained) {
    if (pretrained_age == nullptr) throw ConfigError("pretrained mode needs a pretrained age encoder");
    for (std::string_view net : {kAgeEncoder, kAgeHead}) {
      const auto mine = s.params.names(net);
      for (const auto& name : mine) {
        if (!pretrained_age->contains(name) || pretrained_age->at(name).shape() != s.params.at(name).shape()) {
          throw ShapeError("pretrained age encoder", name, s.params.at(name).shape().str());
        }
      }
      s.params.assign_net(net, *pretrained_age);
    }
  }
  return s;
}

double lr_factor(const TrainConfig& cfg, std::size_t step) {
  if (cfg.lr_decay == LrDecay::kConstant) return 1.0;
  return 1.0 - static_cast<double>(step) / static_cast<double>(cfg.steps);
}

CriticStep critic_phase(TrainState& s, const Tensor& id_emb, const Tensor& age_emb, const TrainConfig& cfg,
                        std::size_t step) {
  const Tensor joint = concat(id_emb, age_emb);
  const optim::RmsPropOptions rms{cfg.lr_critic, cfg.rms_alpha, cfg.rms_eps};
  CriticStep last;
  for (std::size_t k = 0; k < cfg.n_critic; ++k) {
    const auto perm = checked_derangement(id_emb.rows(), derive_seed(cfg.seed_shuffle, {kCriticTag, step, k}));
    const Tensor product = concat(id_emb, synth::gather_rows(age_emb, perm));
    last = critic_step(s.params, s.arch.critic, kCritic, joint, product, cfg.weights.lambda_g,
                       derive_seed(cfg.seed_shuffle, {kInterpTag, step, k}), rms, s.opt);
  }
  return last;
}

namespace {

struct EncoderGraph {
  ad::Var l_id, l_a, l_w;
  bool has_lw = false;
};

// Records the step-4 losses. The age embedding enters the adversarial term
// detached, which is what keeps f_a out of the L_w gradient.
EncoderGraph build_encoder_graph(ad::Graph& g, const nets::Bound& b, const TrainState& s, const synth::Batch& batch,
                                 const TrainConfig& cfg, std::size_t step) {
  EncoderGraph out;
  const ad::Var x = g.constant(batch.x);
  const ad::Var e_id = nets::encode_id(x, b, s.arch);
  const ad::Var e_a = nets::encode_age(x, b, s.arch);
  require_unit_rows(e_id.value(), "f_id output", step);
  require_unit_rows(e_a.value(), "f_a output", step);
  const ad::Var w_id = ad::l2_normalize(b[std::string(kIdHead) + ".W"]);
  require_unit_rows(w_id.value(), "g_id.W", step);
  out.l_id = losses::margin_softmax_loss(e_id, w_id, batch.labels, cfg.weights.scale, cfg.weights.margin);
  out.l_a = losses::age_loss(e_a, b[std::string(kAgeHead) + ".W"], b[std::string(kAgeHead) + ".b"], batch.ages,
                             cfg.weights.age_max, cfg.weights.n_age_bins);
  if (cfg.critic) {
    const ad::Var a_frozen = ad::detach(e_a);
    const auto perm = checked_derangement(batch.x.rows(), derive_seed(cfg.seed_shuffle, {kEncoderTag, step}));
    const ad::Var a_shuffled = g.constant(synth::gather_rows(a_frozen.value(), perm));
    const auto critic = [&](const ad::Var& pair) { return nets::critic_score(pair, b, s.arch); };
    out.l_w = losses::wasserstein_loss(critic(ad::concat_cols(e_id, a_frozen)), critic(ad::concat_cols(e_id, a_shuffled)));
    out.has_lw = true;
  }
  return out;
}

}  // namespace

EncoderLosses encoder_phase(TrainState& s, const synth::Batch& batch, const TrainConfig& cfg, std::size_t step) {
  const bool train_age = cfg.mode == losses::AgeMode::kSupervised;
  std::vector<std::string_view> tracked = {kIdEncoder, kIdHead};
  if (train_age) tracked.insert(tracked.end(), {kAgeEncoder, kAgeHead});
  ad::Graph g;
  const nets::Bound b(g, s.params, {kIdEncoder, kIdHead, kAgeEncoder, kAgeHead, kCritic}, tracked);
  const EncoderGraph eg = build_encoder_graph(g, b, s, batch, cfg, step);

  EncoderLosses out{eg.l_id.value().item(), eg.l_a.value().item(), std::nullopt};
  require_finite(out.l_id, "L_id", step);
  require_finite(out.l_a, "L_a", step);
  ad::Var total = eg.l_id;
  if (eg.has_lw) {
    out.l_w = eg.l_w.value().item();
    require_finite(*out.l_w, "L_w", step);
    total = losses::total_loss(eg.l_id, eg.l_w, eg.l_a, cfg.weights, cfg.mode);
  } else if (train_age) {
    total = ad::add(eg.l_id, ad::scale(eg.l_a, cfg.weights.lambda_a));
  }

  std::vector<std::string> id_names, age_names;
  std::vector<ad::Var> wrt;
  for (std::string_view net : {kIdEncoder, kIdHead}) {
    for (const auto& n : b.names(net)) id_names.push_back(n);
    for (const auto& v : b.vars(net)) wrt.push_back(v);
  }
  if (train_age) {
    for (std::string_view net : {kAgeEncoder, kAgeHead}) {
      for (const auto& n : b.names(net)) age_names.push_back(n);
      for (const auto& v : b.vars(net)) wrt.push_back(v);
    }
  }
  const auto grads = ad::grad_values(total, wrt);
  const double f = lr_factor(cfg, step);
  const std::span<const Tensor> all(grads);
  optim::sgd_step(s.params, id_names, all.first(id_names.size()), {cfg.lr_encoder * f, cfg.momentum, cfg.weight_decay},
                  s.opt);
  if (train_age) {
    optim::sgd_step(s.params, age_names, all.subspan(id_names.size()), {cfg.lr_age * f, cfg.momentum, cfg.weight_decay},
                    s.opt);
  }
  return out;
}

std::vector<Tensor> adversarial_age_gradient(const TrainState& s, const synth::Batch& batch, const TrainConfig& cfg,
                                             std::size_t step) {
  ad::Graph g;
  const nets::Bound b(g, s.params, {kIdEncoder, kIdHead, kAgeEncoder, kAgeHead, kCritic}, {kAgeEncoder});
  const EncoderGraph eg = build_encoder_graph(g, b, s, batch, cfg, step);
  if (!eg.has_lw) throw ConfigError("adversarial_age_gradient needs the critic enabled");
  return ad::grad_values(ad::scale(eg.l_w, cfg.weights.lambda_w), b.vars(kAgeEncoder));
}

double probe_jsd(const TrainState& s, const synth::Dataset& data, std::span<const std::size_t> rows,
                 const TrainConfig& cfg, std::size_t step) {
  const Tensor x = synth::gather_rows(data.x, rows);
  const Tensor id = nets::embed_id(x, s.params, s.arch);
  const Tensor age = nets::embed_age(x, s.params, s.arch);
  require_unit_rows(id, "f_id output", step);
  require_unit_rows(age, "f_a output", step);
  const std::size_t h = rows.size() / 2;
  auto split = [&](std::size_t begin, std::size_t end, std::uint64_t tag) {
    const Tensor i = row_range(id, begin, end), a = row_range(age, begin, end);
    const auto perm = checked_derangement(end - begin, derive_seed(cfg.seed_shuffle, {kProbeTag, step, tag}));
    return std::pair{concat(i, a), concat(i, synth::gather_rows(a, perm))};
  };
  const auto [joint_train, product_train] = split(0, h, 0);
  const auto [joint_test, product_test] = split(h, 2 * h, 1);
  ProbeOptions opt;
  opt.steps = cfg.probe_steps;
  opt.rms = {cfg.probe_lr, cfg.rms_alpha, cfg.rms_eps};
  opt.seed = derive_seed(cfg.seed_params, {kProbeTag, step});
  return fit_jsd_probe(s.arch.probe, joint_train, product_train, joint_test, product_test, opt);
}

TrainResult train(const TrainConfig& cfg, const synth::Dataset& data, const nets::ModelParams* pretrained_age,
                  const Progress& progress) {
  TrainResult result;
  result.state = init_state(cfg, data, pretrained_age);
  TrainState& s = result.state;

  std::vector<std::size_t> probe_rows(data.size());
  for (std::size_t i = 0; i < probe_rows.size(); ++i) probe_rows[i] = i;
  Rng probe_rng(derive_seed(cfg.seed_data, {kProbeTag}));
  probe_rng.shuffle(std::span<std::size_t>(probe_rows));
  probe_rows.resize(std::min(cfg.probe_samples, data.size()));

  std::size_t epoch = 0;
  synth::BatchIter batches(data, cfg.batch_size, derive_seed(cfg.seed_shuffle, {kEpochTag, epoch}));
  synth::Batch batch;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    while (!batches.next(batch)) {
      ++epoch;
      batches = synth::BatchIter(data, cfg.batch_size, derive_seed(cfg.seed_shuffle, {kEpochTag, epoch}));
    }
    MetricsRow row;
    row.step = step;
    row.lr_encoder = cfg.lr_encoder * lr_factor(cfg, step);
    if (step % cfg.probe_every == 0) row.jsd_probe = probe_jsd(s, data, probe_rows, cfg, step);

    if (cfg.critic) {
      const nets::ModelParams before = s.params;
      const Tensor id_emb = nets::embed_id(batch.x, s.params, s.arch);
      const Tensor age_emb = nets::embed_age(batch.x, s.params, s.arch);
      const CriticStep c = critic_phase(s, id_emb, age_emb, cfg, step);
      require_frozen(before, s.params, {kIdEncoder, kIdHead, kAgeEncoder, kAgeHead}, "critic phase");
      row.l_grad = c.l_grad;
      require_finite(c.l_grad, "L_grad", step);
      require_finite(c.l_w, "critic L_w", step);
    }
    const nets::ModelParams before = s.params;
    const EncoderLosses e = encoder_phase(s, batch, cfg, step);
    require_frozen(before, s.params, {kCritic}, "encoder phase");
    if (cfg.mode == losses::AgeMode::kPretrained) {
      require_frozen(before, s.params, {kAgeEncoder, kAgeHead}, "encoder phase (pretrained mode)");
    }
    require_finite(s.params, step);
    row.l_id = e.l_id;
    row.l_a = e.l_a;
    row.l_w = e.l_w;
    if (step + 1 == cfg.steps) {
      // The last row reports the probe on the final parameters.
      row.jsd_probe = probe_jsd(s, data, probe_rows, cfg, cfg.steps);
      result.final_jsd = *row.jsd_probe;
    }
    if (progress) progress(row);
    result.rows.push_back(row);
  }
  return result;
}

PretrainResult pretrain_age_encoder(const synth::Dataset& data, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.mode = losses::AgeMode::kSupervised;
  PretrainResult result;
  result.state = init_state(c, data);
  TrainState& s = result.state;
  std::size_t epoch = 0;
  synth::BatchIter batches(data, c.batch_size, derive_seed(c.seed_shuffle, {kEpochTag, epoch}));
  synth::Batch batch;
  for (std::size_t step = 0; step < c.steps; ++step) {
    while (!batches.next(batch)) {
      ++epoch;
      batches = synth::BatchIter(data, c.batch_size, derive_seed(c.seed_shuffle, {kEpochTag, epoch}));
    }
    ad::Graph g;
    const nets::Bound b(g, s.params, {kAgeEncoder, kAgeHead}, {kAgeEncoder, kAgeHead});
    const ad::Var e_a = nets::encode_age(g.constant(batch.x), b, s.arch);
    const ad::Var l_a = losses::age_loss(e_a, b[std::string(kAgeHead) + ".W"], b[std::string(kAgeHead) + ".b"],
                                         batch.ages, c.weights.age_max, c.weights.n_age_bins);
    require_finite(l_a.value().item(), "L_a", step);
    std::vector<std::string> names;
    std::vector<ad::Var> wrt;
    for (std::string_view net : {kAgeEncoder, kAgeHead}) {
      for (const auto& n : b.names(net)) names.push_back(n);
      for (const auto& v : b.vars(net)) wrt.push_back(v);
    }
    optim::sgd_step(s.params, names, ad::grad_values(l_a, wrt),
                    {c.lr_age * lr_factor(c, step), c.momentum, c.weight_decay}, s.opt);
    require_finite(s.params, step);
    result.l_a.push_back(l_a.value().item());
  }
  return result;
}

double age_bin_accuracy(const TrainState& s, const synth::Dataset& data, const TrainConfig& cfg) {
  const Tensor e = nets::embed_age(data.x, s.params, s.arch);
  const Tensor& w = s.params.at(std::string(kAgeHead) + ".W");
  const Tensor& bias = s.params.at(std::string(kAgeHead) + ".b");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::size_t best = 0;
    double best_v = -INFINITY;
    for (std::size_t k = 0; k < w.cols(); ++k) {
      double v = bias[k];
      for (std::size_t j = 0; j < w.rows(); ++j) v += e(r, j) * w(j, k);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    hits += static_cast<int>(best) == losses::age_bin(data.age[r], cfg.weights.age_max, cfg.weights.n_age_bins);
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

Checkpoint to_checkpoint(const TrainState& s, const TrainConfig& cfg) {
  return Checkpoint{s.arch, s.params, s.opt.buffers(), config_hash(cfg)};
}

}  // namespace wmi::train
