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

#include "wmi/evalsuite.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "wmi/errors.hpp"
#include "wmi/rng.hpp"

namespace wmi::eval {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view s, double& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto p = s.find(sep);
    out.push_back(s.substr(0, p));
    if (p == std::string_view::npos) return out;
    s.remove_prefix(p + 1);
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double accuracy_at(std::span<const ScoredPair> pairs, double threshold) {
  if (pairs.empty()) throw ValueError("accuracy_at: no pairs");
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += (p.similarity >= threshold) == p.same;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double best_threshold(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw ValueError("best_threshold: no pairs");
  std::vector<ScoredPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredPair& a, const ScoredPair& b) { return a.similarity < b.similarity; });
  // Threshold below everything: every pair is called "same".
  long correct = 0;
  for (const auto& p : sorted) correct += p.same;
  double best_t = sorted.front().similarity - 1.0;
  long best = correct;
  for (std::size_t i = 0; i < sorted.size();) {
    const double v = sorted[i].similarity;
    std::size_t j = i;
    for (; j < sorted.size() && sorted[j].similarity == v; ++j) correct += sorted[j].same ? -1 : 1;
    const double t = j < sorted.size() ? 0.5 * (v + sorted[j].similarity) : v + 1.0;
    if (correct > best) {
      best = correct;
      best_t = t;
    }
    i = j;
  }
  return best_t;
}

VerificationReport verify_scored(const std::vector<std::vector<ScoredPair>>& folds) {
  if (folds.size() < 2) throw ValueError("verification needs at least 2 folds");
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (folds[f].empty()) throw ValueError("verification fold " + std::to_string(f) + " is empty");
  }
  VerificationReport r;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<ScoredPair> rest;
    for (std::size_t o = 0; o < folds.size(); ++o) {
      if (o != f) rest.insert(rest.end(), folds[o].begin(), folds[o].end());
    }
    const double t = best_threshold(rest);
    r.thresholds.push_back(t);
    r.fold_accuracy.push_back(accuracy_at(folds[f], t));
  }
  const double n = static_cast<double>(folds.size());
  r.mean = std::accumulate(r.fold_accuracy.begin(), r.fold_accuracy.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : r.fold_accuracy) ss += (a - r.mean) * (a - r.mean);
  r.stddev = std::sqrt(ss / n);
  return r;
}

std::vector<std::vector<ScoredPair>> score_folds(const synth::PairFolds& folds, const Tensor& e) {
  std::vector<std::vector<ScoredPair>> out(folds.n_folds());
  for (std::size_t f = 0; f < folds.n_folds(); ++f) {
    for (const auto& p : folds.folds[f]) {
      if (p.a >= e.rows() || p.b >= e.rows()) {
        throw ValueError("pair (" + std::to_string(p.a) + ", " + std::to_string(p.b) + ") in fold " +
                         std::to_string(f) + " indexes past " + std::to_string(e.rows()) + " samples");
      }
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t c = 0; c < e.cols(); ++c) {
        dot += e(p.a, c) * e(p.b, c);
        na += e(p.a, c) * e(p.a, c);
        nb += e(p.b, c) * e(p.b, c);
      }
      const double denom = std::sqrt(na) * std::sqrt(nb);
      out[f].push_back({denom > 0.0 ? dot / denom : 0.0, p.same});
    }
  }
  return out;
}

VerificationReport cosine_verify(const synth::PairFolds& folds, const Tensor& embeddings) {
  return verify_scored(score_folds(folds, embeddings));
}

namespace {

void check_dims(const Checkpoint& ckpt, const synth::Dataset& data) {
  if (ckpt.arch.d_x != data.d_x) {
    throw ShapeError("evaluation", "checkpoint d_x=" + std::to_string(ckpt.arch.d_x),
                     "dataset d_x=" + std::to_string(data.d_x));
  }
}

}  // namespace

VerificationReport cosine_verify(const synth::PairFolds& folds, const synth::Dataset& data, const Checkpoint& ckpt) {
  check_dims(ckpt, data);
  return cosine_verify(folds, nets::embed_id(data.x, ckpt.params, ckpt.arch));
}

std::vector<double> ridge_fit(const Tensor& x, std::span<const double> y, double ridge) {
  if (x.rows() != y.size()) throw ShapeError("ridge_fit", x.shape().str(), "target[" + std::to_string(y.size()) + "]");
  const std::size_t d = x.cols() + 1;
  std::vector<double> a(d * d, 0.0), b(d, 0.0);
  auto feat = [&](std::size_t r, std::size_t c) { return c + 1 < d ? x(r, c) : 1.0; };
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double fi = feat(r, i);
      b[i] += fi * y[r];
      for (std::size_t j = 0; j <= i; ++j) a[i * d + j] += fi * feat(r, j);
    }
  }
  for (std::size_t i = 0; i + 1 < d; ++i) a[i * d + i] += ridge;
  // Cholesky of the lower triangle in place.
  for (std::size_t j = 0; j < d; ++j) {
    double s = a[j * d + j];
    for (std::size_t k = 0; k < j; ++k) s -= a[j * d + k] * a[j * d + k];
    if (!(s > 0.0)) throw ValueError("ridge_fit: normal equations are not positive definite");
    a[j * d + j] = std::sqrt(s);
    for (std::size_t i = j + 1; i < d; ++i) {
      double t = a[i * d + j];
      for (std::size_t k = 0; k < j; ++k) t -= a[i * d + k] * a[j * d + k];
      a[i * d + j] = t / a[j * d + j];
    }
  }
  std::vector<double> z(d), w(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * d + k] * z[k];
    z[i] = s / a[i * d + i];
  }
  for (std::size_t i = d; i-- > 0;) {
    double s = z[i];
    for (std::size_t k = i + 1; k < d; ++k) s -= a[k * d + i] * w[k];
    w[i] = s / a[i * d + i];
  }
  return w;
}

double r_squared(const Tensor& x, std::span<const double> y, std::span<const double> coef) {
  if (y.empty()) throw ValueError("r_squared: empty target");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double res = 0.0, tot = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double p = coef.back();
    for (std::size_t c = 0; c < x.cols(); ++c) p += coef[c] * x(r, c);
    res += (y[r] - p) * (y[r] - p);
    tot += (y[r] - mean) * (y[r] - mean);
  }
  if (tot == 0.0) return res == 0.0 ? 1.0 : 0.0;
  return 1.0 - res / tot;
}

double age_leakage_probe(const Tensor& embeddings, std::span<const double> ages, const LeakageOptions& opt) {
  const std::size_t n = embeddings.rows();
  if (n != ages.size()) throw ShapeError("age_leakage_probe", embeddings.shape().str(), "ages[" + std::to_string(ages.size()) + "]");
  if (n < 4) throw ValueError("age_leakage_probe: need at least 4 samples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(opt.seed);
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t h = n / 2;
  const std::span<const std::size_t> tr(order.data(), h), te(order.data() + h, n - h);
  std::vector<double> y_tr, y_te;
  for (auto i : tr) y_tr.push_back(ages[i]);
  for (auto i : te) y_te.push_back(ages[i]);
  const auto w = ridge_fit(synth::gather_rows(embeddings, tr), y_tr, opt.ridge);
  return r_squared(synth::gather_rows(embeddings, te), y_te, w);
}

double age_leakage_probe(const Checkpoint& ckpt, const synth::Dataset& data, const LeakageOptions& opt) {
  check_dims(ckpt, data);
  return age_leakage_probe(nets::embed_id(data.x, ckpt.params, ckpt.arch), data.age, opt);
}

std::vector<CurvePoint> jsd_curve(std::string_view text) {
  std::vector<CurvePoint> out;
  std::size_t line_no = 0;
  bool header = false;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (!header) {
      if (line != train::kMetricsHeader) {
        throw FormatError("metrics line " + std::to_string(line_no) + ": expected header '" +
                          std::string(train::kMetricsHeader) + "'");
      }
      header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 7) {
      throw FormatError("metrics line " + std::to_string(line_no) + ": expected 7 fields, got " +
                        std::to_string(cells.size()));
    }
    std::size_t step = 0;
    const auto r = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), step);
    if (r.ec != std::errc() || r.ptr != cells[0].data() + cells[0].size()) {
      throw FormatError("metrics line " + std::to_string(line_no) + ": bad step '" + std::string(cells[0]) + "'");
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double v = 0.0;
      if (!cells[c].empty() && !parse_number(cells[c], v)) {
        throw FormatError("metrics line " + std::to_string(line_no) + ": bad number '" + std::string(cells[c]) + "'");
      }
    }
    if (cells[5].empty()) continue;
    double v = 0.0;
    parse_number(cells[5], v);
    out.push_back({step, v});
  }
  if (!header) throw FormatError("metrics log is empty");
  if (out.empty()) throw FormatError("metrics log has no probe rows");
  return out;
}

std::vector<CurvePoint> jsd_curve(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read metrics file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return jsd_curve(std::string_view(ss.str()));
}

std::vector<CurvePoint> jsd_curve(const std::vector<train::MetricsRow>& rows) {
  std::vector<CurvePoint> out;
  for (const auto& r : rows) {
    if (r.jsd_probe) out.push_back({r.step, *r.jsd_probe});
  }
  return out;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << "step,jsd_probe\n";
  for (const auto& p : curve) f << p.step << ',' << fmt(p.jsd) << '\n';
}

std::string curve_svg(const std::vector<NamedCurve>& curves, std::string_view title) {
  constexpr double w = 640, h = 400, left = 60, right = 150, top = 40, bottom = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double x_max = 1.0, y_max = std::log(2.0);
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      x_max = std::max(x_max, static_cast<double>(p.step));
      y_max = std::max(y_max, p.jsd);
    }
  }
  const auto px = [&](double x) { return left + (w - left - right) * x / x_max; };
  const auto py = [&](double y) { return h - bottom - (h - top - bottom) * y / y_max; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << w - right << "\" y2=\"" << py(0) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << top << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_max * i / 4.0, yv = y_max * i / 4.0;
    s << "<text x=\"" << px(xv) << "\" y=\"" << h - bottom + 18 << "\" text-anchor=\"middle\">" << std::llround(xv) << "</text>\n";
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.3f", yv);
    s << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  s << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">encoder step</text>\n";
  s << "<text x=\"16\" y=\"" << (top + h - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (top + h - bottom) / 2 << ")\">JSD probe (nats)</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = colors[i % 6];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : curves[i].points) s << px(static_cast<double>(p.step)) << ',' << py(p.jsd) << ' ';
    s << "\"/>\n";
    const double ly = top + 20.0 * static_cast<double>(i);
    s << "<line x1=\"" << w - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << w - right + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << w - right + 36 << "\" y=\"" << ly + 4 << "\">" << curves[i].label << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<double> parse_grid(std::string_view text) {
  std::vector<double> out;
  if (trim(text).empty()) throw ConfigError("grid is empty");
  for (std::string_view cell : split(text, ',')) {
    cell = trim(cell);
    double v = 0.0;
    if (cell.empty() || !parse_number(cell, v) || !std::isfinite(v) || v < 0.0) {
      throw ConfigError("grid entry '" + std::string(cell) + "' is not a non-negative number");
    }
    if (std::find(out.begin(), out.end(), v) != out.end()) {
      throw ConfigError("grid value " + std::string(cell) + " appears twice");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, std::span<const double> grid, const AblationInputs& in,
                                      const RowCallback& on_row) {
  if (grid.empty()) throw ConfigError("ablation grid is empty");
  if (in.train == nullptr || in.eval == nullptr || in.folds == nullptr) throw ValueError("ablation inputs missing");
  std::vector<AblationRow> rows;
  for (double lw : grid) {
    AblationRow row;
    row.lambda_w = lw;
    TrainConfig cfg = base;
    cfg.weights.lambda_w = lw;
    std::optional<train::TrainResult> result;
    try {
      result = train::train(cfg, *in.train);
      const Checkpoint ckpt = train::to_checkpoint(result->state, cfg);
      row.report = cosine_verify(*in.folds, *in.eval, ckpt);
      row.age_r2 = age_leakage_probe(ckpt, *in.eval, {1e-3, cfg.seed_data});
      row.final_jsd = result->final_jsd;
      row.curve = jsd_curve(result->rows);
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    if (on_row) on_row(row, result ? &*result : nullptr);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << "lambda_w,mean_acc,std_acc,final_jsd,age_r2\n";
  for (const auto& r : rows) {
    if (r.ok) {
      f << fmt(r.lambda_w) << ',' << fmt(r.report.mean) << ',' << fmt(r.report.stddev) << ',' << fmt(r.final_jsd)
        << ',' << fmt(r.age_r2) << '\n';
    } else {
      f << fmt(r.lambda_w) << ",failed,failed,failed,failed\n";
    }
  }
}

std::string report_json(const VerificationReport& r, double age_r2) {
  nlohmann::ordered_json j;
  j["fold_accuracy"] = r.fold_accuracy;
  j["thresholds"] = r.thresholds;
  j["mean_accuracy"] = r.mean;
  j["std_accuracy"] = r.stddev;
  j["age_leakage_r2"] = age_r2;
  return j.dump(2) + "\n";
}

}  // namespace wmi::eval
