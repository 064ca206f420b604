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

// Reverse-mode differentiation over a recorded tape of matrix operations.
//
// Every operation appends a node to a `Graph`. The reverse pass is itself
// expressed with graph operations, so the gradients returned by `grad` are
// ordinary graph values and can be differentiated again (double backprop).
// Nodes are immutable once recorded; node ids are topologically ordered.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wmi/tensor.hpp"

namespace wmi::ad {

class Graph;

enum class Op : std::uint8_t {
  kLeaf,      // tracked input (parameter or input requiring gradients)
  kConstant,  // untracked input
  kMatMul,
  kMatMulNT,  // a * b^T
  kMatMulTN,  // a^T * b
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kAddRow,         // [n x m] + [1 x m]
  kSumRows,        // [n x m] -> [1 x m]
  kBroadcastRows,  // [1 x m] -> [n x m]
  kMulCol,         // [n x m] * [n x 1], row scaling
  kRowSum,         // [n x m] -> [n x 1]
  kBroadcastCols,  // [n x 1] -> [n x m]
  kTanh,
  kLeakyRelu,
  kSigmoid,
  kLog,
  kExp,
  kSquare,
  kReciprocal,
  kSafeReciprocal,  // 1/x, with 1/0 := 0
  kRowNorm,
  kConcatCols,
  kSliceCols,
  kPadCols,
  kSumAll,
  kBroadcastScalar,
  kMulScalar,  // [n x m] * [1 x 1]
  kSoftmax,
  kSoftmaxXent,  // mean cross-entropy of row-softmax against labels
  kArcMargin,    // cos -> cos(acos(cos) + m) at label entries
};

const char* op_name(Op op) noexcept;

/// Handle to a node in a graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const;

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

struct Node {
  Op op = Op::kConstant;
  int a = -1;
  int b = -1;
  double attr = 0.0;          // slope, scale factor, offset scalar or margin
  std::size_t index0 = 0;     // column offset, broadcast count
  std::size_t index1 = 0;     // slice width / padded width
  Shape target{1, 1};         // broadcast_scalar target shape
  std::shared_ptr<const std::vector<int>> labels;
  Tensor value;
};

/// A single-threaded computation tape. Not copyable or movable: `Var`s hold
/// a pointer to it.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Tracked input: differentiable, may appear in `grad`'s wrt list.
  Var leaf(Tensor value);
  /// Untracked input: treated as a constant by the reverse pass.
  Var constant(Tensor value);

  const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool is_leaf(const Var& v) const { return node(v.id()).op == Op::kLeaf; }
  Var handle(int id) { return Var(this, id); }

  /// Re-evaluates every recorded operation from its inputs' stored values.
  std::vector<Tensor> replay() const;

  // Internal: appends a node after evaluating it.
  Var record(Node node);

 private:
  std::vector<Node> nodes_;
};

// ---- forward operations ---------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);
Var matmul_tn(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
/// Adds a [1 x m] row to every row of `a` (batch broadcasting).
Var add_row(const Var& a, const Var& row);
Var sum_rows(const Var& a);
Var broadcast_rows(const Var& row, std::size_t n);
Var mul_col(const Var& a, const Var& col);
Var row_sum(const Var& a);
Var broadcast_cols(const Var& col, std::size_t m);
Var tanh(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);
Var reciprocal(const Var& a);
Var safe_reciprocal(const Var& a);
/// Row-wise L2 norm, [n x m] -> [n x 1].
Var row_norm(const Var& a);
/// Row-wise L2 normalization. Throws ZeroNormError naming the first zero row.
Var l2_normalize(const Var& a);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, std::size_t offset, std::size_t width);
Var pad_cols(const Var& a, std::size_t offset, std::size_t total);
Var sum_all(const Var& a);
Var mean(const Var& a);
Var broadcast_scalar(const Var& s, Shape target);
Var mul_scalar(const Var& a, const Var& s);
Var softmax(const Var& logits);
/// Mean over rows of -log softmax(logits)[label].
Var softmax_xent(const Var& logits, std::span<const int> labels);
/// Replaces entry (i, labels[i]) by cos(acos(clamp(x, -1, 1)) + margin).
/// The local derivative is recorded as a constant, so this op supports first
/// order gradients only.
Var arc_margin(const Var& cosines, std::span<const int> labels, double margin);
/// Untracked copy of a value.
Var detach(const Var& a);

// ---- reverse pass ---------------------------------------------------------

/// Gradients of a scalar `output` with respect to leaves. The reverse pass is
/// recorded in the same graph, so the results are differentiable.
std::vector<Var> grad(const Var& output, std::span<const Var> wrt);

/// Convenience: gradient values only.
std::vector<Tensor> grad_values(const Var& output, std::span<const Var> wrt);

struct GradPenaltyResult {
  double penalty = 0.0;
  std::vector<Tensor> param_grads;
  Tensor input_grads;  // per-row gradient of f wrt the interpolated input
  Tensor input_grad_norms;
};

/// Penalty mean_i (|grad_x f(x_i)| - 1)^2 and its parameter gradients.
/// `interp_input` must be a tracked leaf; `f` maps [n x d] -> [n x 1].
GradPenaltyResult grad_of_gradnorm(const std::function<Var(const Var&)>& f,
                                   const Var& interp_input, std::span<const Var> params);

/// Records the penalty scalar in the graph without taking parameter grads.
Var gradient_penalty_term(const std::function<Var(const Var&)>& f, const Var& interp_input);

}  // namespace wmi::ad
