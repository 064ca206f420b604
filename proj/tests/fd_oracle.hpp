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

// Central finite-difference oracle. Independent of the reverse pass: it only
// evaluates the forward scalar at perturbed inputs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wmi/rng.hpp"
#include "wmi/tensor.hpp"

namespace wmi::testing {

using ScalarOfTensors = std::function<double(const std::vector<Tensor>&)>;

inline std::vector<Tensor> central_differences(const ScalarOfTensors& f, std::vector<Tensor> at,
                                               double h = 1e-5) {
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < at.size(); ++t) {
    Tensor g(at[t].shape());
    for (std::size_t i = 0; i < at[t].size(); ++i) {
      const double keep = at[t][i];
      at[t][i] = keep + h;
      const double up = f(at);
      at[t][i] = keep - h;
      const double down = f(at);
      at[t][i] = keep;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Fourth-order stencil, for steep objectives where the O(h^2) truncation of
/// the central difference is itself near the tolerance.
inline std::vector<Tensor> five_point_differences(const ScalarOfTensors& f, std::vector<Tensor> at, double h = 1e-4) {
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < at.size(); ++t) {
    Tensor g(at[t].shape());
    for (std::size_t i = 0; i < at[t].size(); ++i) {
      const double keep = at[t][i];
      double v[4];
      const double steps[4] = {2.0, 1.0, -1.0, -2.0};
      for (int k = 0; k < 4; ++k) {
        at[t][i] = keep + steps[k] * h;
        v[k] = f(at);
      }
      at[t][i] = keep;
      g[i] = (-v[0] + 8.0 * v[1] - 8.0 * v[2] + v[3]) / (12.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// ||a - b||_2 / max(||a||_2, ||b||_2, floor). The floor keeps exactly-zero
/// gradients from amplifying the ~1e-11 round-off of the central difference.
inline double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-4) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline double max_relative_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace wmi::testing
