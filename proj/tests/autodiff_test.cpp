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

#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "grad_catalogue.hpp"
#include "wmi/autodiff.hpp"
#include "wmi/errors.hpp"

using namespace wmi;
using namespace wmi::ad;
using wmi::testing::central_differences;
using wmi::testing::max_relative_error;
using wmi::testing::random_tensor;
using wmi::testing::check_primitive;
using wmi::testing::Primitive;
using wmi::testing::primitives;

TEST_CASE("forward: concatenate, normalize and fused cross-entropy examples") {
  Graph g;
  const Var a = g.constant(Tensor(Shape{5, 4}, 1.0));
  const Var b = g.constant(Tensor(Shape{5, 3}, 2.0));
  CHECK(concat_cols(a, b).shape() == Shape{5, 7});

  const Var v = g.constant(Tensor::from_rows({{3.0, 4.0}}));
  const Tensor n = l2_normalize(v).value();
  CHECK(n(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n(0, 1) == doctest::Approx(0.8).epsilon(1e-15));

  const Var logits = g.constant(Tensor::from_rows({{0.0, 0.0, 0.0}}));
  const int label = 1;
  CHECK(softmax_xent(logits, std::span<const int>(&label, 1)).value().item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("forward: structured errors") {
  Graph g;
  const Var a = g.constant(Tensor(Shape{2, 3}));
  const Var b = g.constant(Tensor(Shape{2, 2}));
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(e.op() == "matmul");
    CHECK(e.lhs() == "[2x3]");
    CHECK(e.rhs() == "[2x2]");
  }
  const Var z = g.constant(Tensor::from_rows({{1.0, 0.0}, {0.0, 0.0}, {2.0, 1.0}}));
  try {
    (void)l2_normalize(z);
    FAIL("expected ZeroNormError");
  } catch (const ZeroNormError& e) {
    CHECK(e.row() == 1);
  }
}

TEST_CASE("grad: closed-form examples") {
  Graph g;
  const Var x = g.leaf(Tensor::from_rows({{1.0, 2.0, 3.0}}));
  const Tensor dx = grad_values(sum_all(square(x)), std::span<const Var>(&x, 1)).front();
  CHECK(dx[0] == 2.0);
  CHECK(dx[1] == 4.0);
  CHECK(dx[2] == 6.0);

  const Var z = g.leaf(Tensor::scalar(0.0));
  CHECK(grad_values(ad::tanh(z), std::span<const Var>(&z, 1)).front().item() == 1.0);
}

TEST_CASE("grad: errors for non-scalar output and non-leaf wrt") {
  Graph g;
  const Var x = g.leaf(Tensor(Shape{2, 2}, 1.0));
  const Var y = square(x);
  CHECK_THROWS_AS(grad(y, std::span<const Var>(&x, 1)), GraphError);
  const Var s = sum_all(y);
  CHECK_THROWS_AS(grad(s, std::span<const Var>(&y, 1)), GraphError);
  const Var c = g.constant(Tensor(Shape{2, 2}, 1.0));
  CHECK_THROWS_AS(grad(s, std::span<const Var>(&c, 1)), GraphError);
}

TEST_CASE("grad: every primitive matches central differences over 100 seeded trials") {
  for (const Primitive& p : primitives()) {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      worst = std::max(worst, check_primitive(p, derive_seed(2024, {trial})));
    }
    INFO(p.name << " worst relative error " << worst);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("grad: random three-layer network matches finite differences") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(derive_seed(7, {trial}));
    const std::vector<Tensor> xs = {random_tensor({6, 5}, rng), random_tensor({5, 8}, rng),
                                    random_tensor({1, 8}, rng), random_tensor({8, 4}, rng),
                                    random_tensor({4, 1}, rng)};
    auto build = [](const std::vector<Var>& v) {
      Var h = ad::tanh(add(matmul(v[0], v[1]), v[2]));
      h = sigmoid(matmul(h, v[3]));
      return mean(square(matmul(h, v[4])));
    };
    auto f = [&](const std::vector<Tensor>& at) {
      Graph g;
      std::vector<Var> leaves;
      for (const auto& t : at) leaves.push_back(g.leaf(t));
      return build(leaves).value().item();
    };
    Graph g;
    std::vector<Var> leaves;
    for (const auto& t : xs) leaves.push_back(g.leaf(t));
    const auto analytic = grad_values(build(leaves), leaves);
    CHECK(max_relative_error(analytic, central_differences(f, xs)) < 1e-5);
  }
}

TEST_CASE("grad: linearity, gradient of a sum equals sum of gradients") {
  Rng rng(11);
  Graph g;
  const Var x = g.leaf(random_tensor({3, 4}, rng));
  const Var f1 = sum_all(ad::tanh(x));
  const Var f2 = mean(square(x));
  const Tensor g1 = grad_values(f1, std::span<const Var>(&x, 1)).front();
  const Tensor g2 = grad_values(f2, std::span<const Var>(&x, 1)).front();
  const Tensor g12 = grad_values(add(f1, f2), std::span<const Var>(&x, 1)).front();
  for (std::size_t i = 0; i < g12.size(); ++i) CHECK(g12[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-14));
}

TEST_CASE("grad: unreachable leaf receives an exact zero gradient") {
  Graph g;
  const Var x = g.leaf(Tensor(Shape{2, 2}, 1.0));
  const Var unused = g.leaf(Tensor(Shape{1, 3}, 5.0));
  const std::vector<Var> wrt = {x, unused};
  const auto grads = grad_values(sum_all(x), wrt);
  for (double v : grads[1].data()) CHECK(v == 0.0);
}

TEST_CASE("graph: replaying twice reproduces every activation bit-exactly") {
  Rng rng(3);
  Graph g;
  const Var x = g.leaf(random_tensor({4, 3}, rng));
  const Var w = g.leaf(random_tensor({3, 2}, rng));
  const Var y = mean(square(leaky_relu(matmul(l2_normalize(x), w), 0.2)));
  (void)grad(y, std::vector<Var>{x, w});
  const auto first = g.replay();
  const auto second = g.replay();
  REQUIRE(first.size() == g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Tensor& stored = g.node(static_cast<int>(i)).value;
    REQUIRE(first[i].size() == stored.size());
    CHECK(std::memcmp(first[i].data().data(), stored.data().data(), stored.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(first[i].data().data(), second[i].data().data(), stored.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("grad_of_gradnorm: linear critic closed form") {
  Graph g;
  const Var w = g.leaf(Tensor::from_rows({{3.0}, {4.0}}));
  const Var x = g.leaf(Tensor::from_rows({{0.1, -0.3}, {2.0, 0.5}, {-1.0, 1.0}}));
  auto f = [&w](const Var& in) { return matmul(in, w); };
  const auto r = grad_of_gradnorm(f, x, std::span<const Var>(&w, 1));
  CHECK(r.penalty == 16.0);
  CHECK(r.param_grads[0][0] == doctest::Approx(4.8).epsilon(1e-14));
  CHECK(r.param_grads[0][1] == doctest::Approx(6.4).epsilon(1e-14));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.input_grads(i, 0) == 3.0);
    CHECK(r.input_grads(i, 1) == 4.0);
  }
}

TEST_CASE("grad_of_gradnorm: identity map sits at the unit-Lipschitz fixed point") {
  Graph g;
  const Var w = g.leaf(Tensor::scalar(1.0));
  const Var x = g.leaf(Tensor::from_rows({{0.5}, {-2.0}}));
  auto f = [&w](const Var& in) { return matmul(in, w); };
  const auto r = grad_of_gradnorm(f, x, std::span<const Var>(&w, 1));
  CHECK(r.penalty == 0.0);
  CHECK(r.param_grads[0].item() == 0.0);
}

TEST_CASE("grad_of_gradnorm: untracked input is rejected with guidance") {
  Graph g;
  const Var w = g.leaf(Tensor::from_rows({{1.0}, {1.0}}));
  const Var x = g.constant(Tensor(Shape{2, 2}, 1.0));
  auto f = [&w](const Var& in) { return matmul(in, w); };
  try {
    (void)grad_of_gradnorm(f, x, std::span<const Var>(&w, 1));
    FAIL("expected GraphError");
  } catch (const GraphError& e) {
    CHECK(std::string(e.what()).find("Graph::leaf") != std::string::npos);
  }
}

TEST_CASE("grad_of_gradnorm: two-layer critic matches finite differences of the penalty") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(derive_seed(99, {trial}));
    const Tensor input = random_tensor({5, 3}, rng);
    const std::vector<Tensor> params = {random_tensor({3, 6}, rng), random_tensor({1, 6}, rng),
                                        random_tensor({6, 1}, rng), random_tensor({1, 1}, rng)};
    auto critic = [](const std::vector<Var>& p) {
      return [p](const Var& in) {
        return add(matmul(leaky_relu(add(matmul(in, p[0]), p[1]), 0.2), p[2]), p[3]);
      };
    };
    auto penalty = [&](const std::vector<Tensor>& at) {
      Graph g;
      std::vector<Var> p;
      for (const auto& t : at) p.push_back(g.leaf(t));
      const Var x = g.leaf(input);
      return gradient_penalty_term(critic(p), x).value().item();
    };
    Graph g;
    std::vector<Var> p;
    for (const auto& t : params) p.push_back(g.leaf(t));
    const Var x = g.leaf(input);
    const auto r = grad_of_gradnorm(critic(p), x, p);
    CHECK(r.penalty == doctest::Approx(penalty(params)).epsilon(1e-15));
    CHECK(max_relative_error(r.param_grads, central_differences(penalty, params)) < 1e-4);
  }
}
