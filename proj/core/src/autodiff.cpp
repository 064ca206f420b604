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

#include "wmi/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wmi/errors.hpp"

namespace wmi::ad {
namespace {

void require_same_graph(const char* op, const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw GraphError(std::string(op) + ": invalid operand");
  if (&a.graph() != &b.graph()) throw GraphError(std::string(op) + ": operands from different graphs");
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) throw ShapeError(op, a.str(), b.str());
}

constexpr double kArcClamp = 1.0 - 1e-12;

// C = A * B, A [n x k], B [k x m].
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = cp + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ap[i * k + p];
      const double* brow = bp + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C = A * B^T, A [n x k], B [m x k].
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = ap + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = bp + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      cp[i * m + j] = s;
    }
  }
}

// C = A^T * B, A [k x n], B [k x m].
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = ap + p * n;
    const double* brow = bp + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = arow[i];
      double* crow = cp + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      out(r, c) = std::exp(x(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) /= z;
  }
  return out;
}

double arc_margin_value(double c, double m) {
  const double cc = std::clamp(c, -1.0, 1.0);
  return std::cos(std::acos(cc) + m);
}

// d/dc cos(acos(c) + m) = cos(m) + sin(m) * c / sqrt(1 - c^2)
double arc_margin_slope(double c, double m) {
  const double cc = std::clamp(c, -kArcClamp, kArcClamp);
  return std::cos(m) + std::sin(m) * cc / std::sqrt(1.0 - cc * cc);
}

const Tensor& in(const std::vector<Node>& nodes, int id) {
  return nodes[static_cast<std::size_t>(id)].value;
}

// Forward evaluation of a node from the stored values of its inputs. Shared by
// `record` and `replay`, which is what makes replay bit-exact.
Tensor evaluate(const Node& n, const std::vector<Node>& nodes) {
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      return n.value;
    case Op::kMatMul: {
      const Tensor& a = in(nodes, n.a);
      const Tensor& b = in(nodes, n.b);
      Tensor out(Shape{a.rows(), b.cols()});
      gemm_nn(a, b, out);
      return out;
    }
    case Op::kMatMulNT: {
      const Tensor& a = in(nodes, n.a);
      const Tensor& b = in(nodes, n.b);
      Tensor out(Shape{a.rows(), b.rows()});
      gemm_nt(a, b, out);
      return out;
    }
    case Op::kMatMulTN: {
      const Tensor& a = in(nodes, n.a);
      const Tensor& b = in(nodes, n.b);
      Tensor out(Shape{a.cols(), b.cols()});
      gemm_tn(a, b, out);
      return out;
    }
    case Op::kAdd:
      return zip(in(nodes, n.a), in(nodes, n.b), [](double x, double y) { return x + y; });
    case Op::kSub:
      return zip(in(nodes, n.a), in(nodes, n.b), [](double x, double y) { return x - y; });
    case Op::kMul:
      return zip(in(nodes, n.a), in(nodes, n.b), [](double x, double y) { return x * y; });
    case Op::kScale: {
      const double c = n.attr;
      return map(in(nodes, n.a), [c](double x) { return c * x; });
    }
    case Op::kAddScalar: {
      const double c = n.attr;
      return map(in(nodes, n.a), [c](double x) { return x + c; });
    }
    case Op::kAddRow: {
      const Tensor& a = in(nodes, n.a);
      const Tensor& row = in(nodes, n.b);
      Tensor out(a.shape());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) + row[c];
      return out;
    }
    case Op::kSumRows: {
      const Tensor& a = in(nodes, n.a);
      Tensor out(Shape{1, a.cols()});
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out[c] += a(r, c);
      return out;
    }
    case Op::kBroadcastRows: {
      const Tensor& row = in(nodes, n.a);
      Tensor out(Shape{n.index0, row.cols()});
      for (std::size_t r = 0; r < n.index0; ++r)
        for (std::size_t c = 0; c < row.cols(); ++c) out(r, c) = row[c];
      return out;
    }
    case Op::kMulCol: {
      const Tensor& a = in(nodes, n.a);
      const Tensor& col = in(nodes, n.b);
      Tensor out(a.shape());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) * col[r];
      return out;
    }
    case Op::kRowSum: {
      const Tensor& a = in(nodes, n.a);
      Tensor out(Shape{a.rows(), 1});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c);
        out[r] = s;
      }
      return out;
    }
    case Op::kBroadcastCols: {
      const Tensor& col = in(nodes, n.a);
      Tensor out(Shape{col.rows(), n.index0});
      for (std::size_t r = 0; r < col.rows(); ++r)
        for (std::size_t c = 0; c < n.index0; ++c) out(r, c) = col[r];
      return out;
    }
    case Op::kTanh:
      return map(in(nodes, n.a), [](double x) { return std::tanh(x); });
    case Op::kLeakyRelu: {
      const double s = n.attr;
      return map(in(nodes, n.a), [s](double x) { return x > 0.0 ? x : s * x; });
    }
    case Op::kSigmoid:
      return map(in(nodes, n.a), [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
    case Op::kLog:
      return map(in(nodes, n.a), [](double x) { return std::log(x); });
    case Op::kExp:
      return map(in(nodes, n.a), [](double x) { return std::exp(x); });
    case Op::kSquare:
      return map(in(nodes, n.a), [](double x) { return x * x; });
    case Op::kReciprocal:
      return map(in(nodes, n.a), [](double x) { return 1.0 / x; });
    case Op::kSafeReciprocal:
      return map(in(nodes, n.a), [](double x) { return x == 0.0 ? 0.0 : 1.0 / x; });
    case Op::kRowNorm: {
      const Tensor& a = in(nodes, n.a);
      Tensor out(Shape{a.rows(), 1});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c) * a(r, c);
        out[r] = std::sqrt(s);
      }
      return out;
    }
    case Op::kConcatCols: {
      const Tensor& a = in(nodes, n.a);
      const Tensor& b = in(nodes, n.b);
      Tensor out(Shape{a.rows(), a.cols() + b.cols()});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
        for (std::size_t c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
      }
      return out;
    }
    case Op::kSliceCols: {
      const Tensor& a = in(nodes, n.a);
      Tensor out(Shape{a.rows(), n.index1});
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < n.index1; ++c) out(r, c) = a(r, n.index0 + c);
      return out;
    }
    case Op::kPadCols: {
      const Tensor& a = in(nodes, n.a);
      Tensor out(Shape{a.rows(), n.index1});
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, n.index0 + c) = a(r, c);
      return out;
    }
    case Op::kSumAll: {
      double s = 0.0;
      for (double v : in(nodes, n.a).data()) s += v;
      return Tensor::scalar(s);
    }
    case Op::kBroadcastScalar:
      return Tensor(n.target, in(nodes, n.a)[0]);
    case Op::kMulScalar: {
      const double s = in(nodes, n.b)[0];
      return map(in(nodes, n.a), [s](double x) { return x * s; });
    }
    case Op::kSoftmax:
      return softmax_rows(in(nodes, n.a));
    case Op::kSoftmaxXent: {
      const Tensor& x = in(nodes, n.a);
      const auto& labels = *n.labels;
      double total = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) z += std::exp(x(r, c) - mx);
        total += std::log(z) + mx - x(r, static_cast<std::size_t>(labels[r]));
      }
      return Tensor::scalar(total / static_cast<double>(x.rows()));
    }
    case Op::kArcMargin: {
      Tensor out = in(nodes, n.a);
      const auto& labels = *n.labels;
      for (std::size_t r = 0; r < out.rows(); ++r) {
        const auto c = static_cast<std::size_t>(labels[r]);
        out(r, c) = arc_margin_value(out(r, c), n.attr);
      }
      return out;
    }
  }
  throw GraphError("unknown op");
}

Var unary(Op op, const Var& a, double attr = 0.0) {
  if (!a.valid()) throw GraphError(std::string(op_name(op)) + ": invalid operand");
  Node n;
  n.op = op;
  n.a = a.id();
  n.attr = attr;
  return a.graph().record(std::move(n));
}

Var binary(Op op, const Var& a, const Var& b) {
  require_same_graph(op_name(op), a, b);
  Node n;
  n.op = op;
  n.a = a.id();
  n.b = b.id();
  return a.graph().record(std::move(n));
}

std::shared_ptr<const std::vector<int>> checked_labels(const char* op, const Shape& s,
                                                       std::span<const int> labels) {
  if (labels.size() != s.rows) {
    throw ShapeError(op, s.str(), "labels[" + std::to_string(labels.size()) + "]");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= s.cols) {
      throw ValueError(std::string(op) + ": label " + std::to_string(l) + " out of range [0," +
                       std::to_string(s.cols) + ")");
    }
  }
  return std::make_shared<const std::vector<int>>(labels.begin(), labels.end());
}

// Input gradients of node `id` given upstream gradient `g`. Built from graph
// operations so the result is itself differentiable.
void backprop(Graph& graph, int id, const Var& g, Var& ga, Var& gb) {
  const Node& n = graph.node(id);
  // Copies: recording new nodes may reallocate the node vector.
  const Op op = n.op;
  const int ia = n.a, ib = n.b;
  const double attr = n.attr;
  const std::size_t index0 = n.index0, index1 = n.index1;
  const auto labels = n.labels;
  auto var = [&graph](int i) { return graph.handle(i); };
  const Var a = ia >= 0 ? var(ia) : Var{};
  const Var b = ib >= 0 ? var(ib) : Var{};
  const Var y = var(id);

  switch (op) {
    case Op::kLeaf:
    case Op::kConstant:
      return;
    case Op::kMatMul:
      ga = matmul_nt(g, b);
      gb = matmul_tn(a, g);
      return;
    case Op::kMatMulNT:
      ga = matmul(g, b);
      gb = matmul_tn(g, a);
      return;
    case Op::kMatMulTN:
      ga = matmul_nt(b, g);
      gb = matmul(a, g);
      return;
    case Op::kAdd:
      ga = g;
      gb = g;
      return;
    case Op::kSub:
      ga = g;
      gb = scale(g, -1.0);
      return;
    case Op::kMul:
      ga = mul(g, b);
      gb = mul(g, a);
      return;
    case Op::kScale:
      ga = scale(g, attr);
      return;
    case Op::kAddScalar:
      ga = g;
      return;
    case Op::kAddRow:
      ga = g;
      gb = sum_rows(g);
      return;
    case Op::kSumRows:
      ga = broadcast_rows(g, a.shape().rows);
      return;
    case Op::kBroadcastRows:
      ga = sum_rows(g);
      return;
    case Op::kMulCol:
      ga = mul_col(g, b);
      gb = row_sum(mul(g, a));
      return;
    case Op::kRowSum:
      ga = broadcast_cols(g, a.shape().cols);
      return;
    case Op::kBroadcastCols:
      ga = row_sum(g);
      return;
    case Op::kTanh:
      ga = mul(g, add_scalar(scale(square(y), -1.0), 1.0));
      return;
    case Op::kLeakyRelu: {
      Tensor mask = map(a.value(), [attr](double x) { return x > 0.0 ? 1.0 : attr; });
      ga = mul(g, graph.constant(std::move(mask)));
      return;
    }
    case Op::kSigmoid:
      ga = mul(g, mul(y, add_scalar(scale(y, -1.0), 1.0)));
      return;
    case Op::kLog:
      ga = mul(g, reciprocal(a));
      return;
    case Op::kExp:
      ga = mul(g, y);
      return;
    case Op::kSquare:
      ga = mul(g, scale(a, 2.0));
      return;
    case Op::kReciprocal:
    case Op::kSafeReciprocal:
      ga = mul(g, scale(square(y), -1.0));
      return;
    case Op::kRowNorm:
      ga = mul_col(a, mul(g, safe_reciprocal(y)));
      return;
    case Op::kConcatCols: {
      const std::size_t wa = a.shape().cols, wb = b.shape().cols;
      ga = slice_cols(g, 0, wa);
      gb = slice_cols(g, wa, wb);
      return;
    }
    case Op::kSliceCols:
      ga = pad_cols(g, index0, a.shape().cols);
      return;
    case Op::kPadCols:
      ga = slice_cols(g, index0, a.shape().cols);
      (void)index1;
      return;
    case Op::kSumAll:
      ga = broadcast_scalar(g, a.shape());
      return;
    case Op::kBroadcastScalar:
      ga = sum_all(g);
      return;
    case Op::kMulScalar:
      ga = mul_scalar(g, b);
      gb = sum_all(mul(g, a));
      return;
    case Op::kSoftmax:
      ga = mul(y, sub(g, broadcast_cols(row_sum(mul(g, y)), y.shape().cols)));
      return;
    case Op::kSoftmaxXent: {
      const Shape s = a.shape();
      Tensor onehot(s);
      for (std::size_t r = 0; r < s.rows; ++r) onehot(r, static_cast<std::size_t>((*labels)[r])) = 1.0;
      const Var diff = sub(softmax(a), graph.constant(std::move(onehot)));
      ga = mul_scalar(scale(diff, 1.0 / static_cast<double>(s.rows)), g);
      return;
    }
    case Op::kArcMargin: {
      const Tensor& x = a.value();
      Tensor slope(x.shape(), 1.0);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto c = static_cast<std::size_t>((*labels)[r]);
        slope(r, c) = arc_margin_slope(x(r, c), attr);
      }
      ga = mul(g, graph.constant(std::move(slope)));
      return;
    }
  }
}

}  // namespace

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulNT: return "matmul_nt";
    case Op::kMatMulTN: return "matmul_tn";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kAddRow: return "add_row";
    case Op::kSumRows: return "sum_rows";
    case Op::kBroadcastRows: return "broadcast_rows";
    case Op::kMulCol: return "mul_col";
    case Op::kRowSum: return "row_sum";
    case Op::kBroadcastCols: return "broadcast_cols";
    case Op::kTanh: return "tanh";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kSquare: return "square";
    case Op::kReciprocal: return "reciprocal";
    case Op::kSafeReciprocal: return "safe_reciprocal";
    case Op::kRowNorm: return "row_norm";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kPadCols: return "pad_cols";
    case Op::kSumAll: return "sum_all";
    case Op::kBroadcastScalar: return "broadcast_scalar";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kSoftmax: return "softmax";
    case Op::kSoftmaxXent: return "softmax_xent";
    case Op::kArcMargin: return "arc_margin";
  }
  return "?";
}

const Tensor& Var::value() const { return graph_->value(id_); }
const Shape& Var::shape() const { return graph_->value(id_).shape(); }

Var Graph::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::record(Node node) {
  node.value = evaluate(node, nodes_);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

std::vector<Tensor> Graph::replay() const {
  // Evaluate into a scratch copy so replayed values feed replayed consumers.
  std::vector<Node> scratch;
  scratch.reserve(nodes_.size());
  std::vector<Tensor> out;
  out.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    Node copy = n;
    copy.value = evaluate(n, scratch);
    out.push_back(copy.value);
    scratch.push_back(std::move(copy));
  }
  return out;
}

Var matmul(const Var& a, const Var& b) {
  require_same_graph("matmul", a, b);
  if (a.shape().cols != b.shape().rows) throw ShapeError("matmul", a.shape().str(), b.shape().str());
  return binary(Op::kMatMul, a, b);
}

Var matmul_nt(const Var& a, const Var& b) {
  require_same_graph("matmul_nt", a, b);
  if (a.shape().cols != b.shape().cols) throw ShapeError("matmul_nt", a.shape().str(), b.shape().str());
  return binary(Op::kMatMulNT, a, b);
}

Var matmul_tn(const Var& a, const Var& b) {
  require_same_graph("matmul_tn", a, b);
  if (a.shape().rows != b.shape().rows) throw ShapeError("matmul_tn", a.shape().str(), b.shape().str());
  return binary(Op::kMatMulTN, a, b);
}

Var add(const Var& a, const Var& b) {
  require_same_graph("add", a, b);
  if (b.shape().rows == 1 && a.shape().rows > 1 && a.shape().cols == b.shape().cols) return add_row(a, b);
  require_same_shape("add", a.shape(), b.shape());
  return binary(Op::kAdd, a, b);
}

Var sub(const Var& a, const Var& b) {
  require_same_graph("sub", a, b);
  require_same_shape("sub", a.shape(), b.shape());
  return binary(Op::kSub, a, b);
}

Var mul(const Var& a, const Var& b) {
  require_same_graph("mul", a, b);
  require_same_shape("mul", a.shape(), b.shape());
  return binary(Op::kMul, a, b);
}

Var scale(const Var& a, double c) { return unary(Op::kScale, a, c); }
Var add_scalar(const Var& a, double c) { return unary(Op::kAddScalar, a, c); }

Var add_row(const Var& a, const Var& row) {
  require_same_graph("add_row", a, row);
  if (row.shape().rows != 1 || row.shape().cols != a.shape().cols) {
    throw ShapeError("add_row", a.shape().str(), row.shape().str());
  }
  return binary(Op::kAddRow, a, row);
}

Var sum_rows(const Var& a) { return unary(Op::kSumRows, a); }

Var broadcast_rows(const Var& row, std::size_t n) {
  if (row.shape().rows != 1) throw ShapeError("broadcast_rows", row.shape().str(), "[1xm]");
  Node node;
  node.op = Op::kBroadcastRows;
  node.a = row.id();
  node.index0 = n;
  return row.graph().record(std::move(node));
}

Var mul_col(const Var& a, const Var& col) {
  require_same_graph("mul_col", a, col);
  if (col.shape().cols != 1 || col.shape().rows != a.shape().rows) {
    throw ShapeError("mul_col", a.shape().str(), col.shape().str());
  }
  return binary(Op::kMulCol, a, col);
}

Var row_sum(const Var& a) { return unary(Op::kRowSum, a); }

Var broadcast_cols(const Var& col, std::size_t m) {
  if (col.shape().cols != 1) throw ShapeError("broadcast_cols", col.shape().str(), "[nx1]");
  Node node;
  node.op = Op::kBroadcastCols;
  node.a = col.id();
  node.index0 = m;
  return col.graph().record(std::move(node));
}

Var tanh(const Var& a) { return unary(Op::kTanh, a); }
Var leaky_relu(const Var& a, double slope) { return unary(Op::kLeakyRelu, a, slope); }
Var sigmoid(const Var& a) { return unary(Op::kSigmoid, a); }
Var log(const Var& a) { return unary(Op::kLog, a); }
Var exp(const Var& a) { return unary(Op::kExp, a); }
Var square(const Var& a) { return unary(Op::kSquare, a); }
Var reciprocal(const Var& a) { return unary(Op::kReciprocal, a); }
Var safe_reciprocal(const Var& a) { return unary(Op::kSafeReciprocal, a); }
Var row_norm(const Var& a) { return unary(Op::kRowNorm, a); }

Var l2_normalize(const Var& a) {
  const Var norms = row_norm(a);
  const Tensor& nv = norms.value();
  for (std::size_t r = 0; r < nv.rows(); ++r) {
    if (nv[r] == 0.0) throw ZeroNormError(r);
  }
  return mul_col(a, reciprocal(norms));
}

Var concat_cols(const Var& a, const Var& b) {
  require_same_graph("concat_cols", a, b);
  if (a.shape().rows != b.shape().rows) throw ShapeError("concat_cols", a.shape().str(), b.shape().str());
  return binary(Op::kConcatCols, a, b);
}

Var slice_cols(const Var& a, std::size_t offset, std::size_t width) {
  if (width == 0 || offset + width > a.shape().cols) {
    throw ShapeError("slice_cols", a.shape().str(),
                     "cols [" + std::to_string(offset) + "," + std::to_string(offset + width) + ")");
  }
  Node node;
  node.op = Op::kSliceCols;
  node.a = a.id();
  node.index0 = offset;
  node.index1 = width;
  return a.graph().record(std::move(node));
}

Var pad_cols(const Var& a, std::size_t offset, std::size_t total) {
  if (offset + a.shape().cols > total) {
    throw ShapeError("pad_cols", a.shape().str(), "width " + std::to_string(total));
  }
  Node node;
  node.op = Op::kPadCols;
  node.a = a.id();
  node.index0 = offset;
  node.index1 = total;
  return a.graph().record(std::move(node));
}

Var sum_all(const Var& a) { return unary(Op::kSumAll, a); }

Var mean(const Var& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.shape().size())); }

Var broadcast_scalar(const Var& s, Shape target) {
  if (s.shape().size() != 1) throw ShapeError("broadcast_scalar", s.shape().str(), "[1x1]");
  Node node;
  node.op = Op::kBroadcastScalar;
  node.a = s.id();
  node.target = target;
  return s.graph().record(std::move(node));
}

Var mul_scalar(const Var& a, const Var& s) {
  require_same_graph("mul_scalar", a, s);
  if (s.shape().size() != 1) throw ShapeError("mul_scalar", a.shape().str(), s.shape().str());
  return binary(Op::kMulScalar, a, s);
}

Var softmax(const Var& logits) { return unary(Op::kSoftmax, logits); }

Var softmax_xent(const Var& logits, std::span<const int> labels) {
  Node node;
  node.op = Op::kSoftmaxXent;
  node.a = logits.id();
  node.labels = checked_labels("softmax_xent", logits.shape(), labels);
  return logits.graph().record(std::move(node));
}

Var arc_margin(const Var& cosines, std::span<const int> labels, double margin) {
  Node node;
  node.op = Op::kArcMargin;
  node.a = cosines.id();
  node.attr = margin;
  node.labels = checked_labels("arc_margin", cosines.shape(), labels);
  return cosines.graph().record(std::move(node));
}

Var detach(const Var& a) { return a.graph().constant(a.value()); }

std::vector<Var> grad(const Var& output, std::span<const Var> wrt) {
  if (!output.valid()) throw GraphError("grad: invalid output");
  Graph& graph = output.graph();
  if (output.shape().size() != 1) {
    throw GraphError("grad: output must be scalar, got " + output.shape().str());
  }
  const auto top = static_cast<std::size_t>(output.id());
  std::vector<char> needed(top + 1, 0);
  for (const Var& w : wrt) {
    if (!w.valid() || &w.graph() != &graph) throw GraphError("grad: wrt tensor from another graph");
    if (!graph.is_leaf(w)) {
      throw GraphError(std::string("grad: wrt node ") + std::to_string(w.id()) + " (" +
                       op_name(graph.node(w.id()).op) + ") is not a tracked leaf");
    }
    if (static_cast<std::size_t>(w.id()) <= top) needed[static_cast<std::size_t>(w.id())] = 1;
  }
  for (std::size_t i = 0; i <= top; ++i) {
    const Node& n = graph.node(static_cast<int>(i));
    if (n.a >= 0 && needed[static_cast<std::size_t>(n.a)]) needed[i] = 1;
    if (n.b >= 0 && needed[static_cast<std::size_t>(n.b)]) needed[i] = 1;
  }

  std::vector<Var> grads(top + 1);
  grads[top] = graph.constant(Tensor::scalar(1.0));
  auto accumulate = [&grads](int id, const Var& g) {
    auto& slot = grads[static_cast<std::size_t>(id)];
    slot = slot.valid() ? add(slot, g) : g;
  };
  for (std::size_t i = top + 1; i-- > 0;) {
    if (!needed[i] || !grads[i].valid()) continue;
    const Node& n = graph.node(static_cast<int>(i));
    if (n.op == Op::kLeaf || n.op == Op::kConstant) continue;
    const int ia = n.a, ib = n.b;
    Var ga, gb;
    backprop(graph, static_cast<int>(i), grads[i], ga, gb);
    if (ia >= 0 && ga.valid() && needed[static_cast<std::size_t>(ia)]) accumulate(ia, ga);
    if (ib >= 0 && gb.valid() && needed[static_cast<std::size_t>(ib)]) accumulate(ib, gb);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    const auto id = static_cast<std::size_t>(w.id());
    if (id <= top && grads[id].valid()) {
      out.push_back(grads[id]);
    } else {
      out.push_back(graph.constant(Tensor(w.shape(), 0.0)));
    }
  }
  return out;
}

std::vector<Tensor> grad_values(const Var& output, std::span<const Var> wrt) {
  std::vector<Tensor> out;
  for (const Var& g : grad(output, wrt)) out.push_back(g.value());
  return out;
}

namespace {

struct PenaltyVars {
  Var input_grad;
  Var norms;
  Var penalty;
};

PenaltyVars build_penalty(const std::function<Var(const Var&)>& f, const Var& interp_input) {
  if (!interp_input.graph().is_leaf(interp_input)) {
    throw GraphError(
        "grad_of_gradnorm: input-gradient tracking is disabled for the interpolated input; "
        "create it with Graph::leaf() instead of Graph::constant()");
  }
  const Var scores = f(interp_input);
  if (scores.shape().cols != 1 || scores.shape().rows != interp_input.shape().rows) {
    throw ShapeError("grad_of_gradnorm", scores.shape().str(), "[nx1]");
  }
  // Rows are independent, so the gradient of the sum holds every per-row input gradient.
  const Var total = sum_all(scores);
  PenaltyVars out;
  out.input_grad = grad(total, std::span<const Var>(&interp_input, 1)).front();
  out.norms = row_norm(out.input_grad);
  out.penalty = mean(square(add_scalar(out.norms, -1.0)));
  return out;
}

}  // namespace

Var gradient_penalty_term(const std::function<Var(const Var&)>& f, const Var& interp_input) {
  return build_penalty(f, interp_input).penalty;
}

GradPenaltyResult grad_of_gradnorm(const std::function<Var(const Var&)>& f, const Var& interp_input,
                                   std::span<const Var> params) {
  const PenaltyVars pv = build_penalty(f, interp_input);
  GradPenaltyResult result;
  result.penalty = pv.penalty.value().item();
  result.input_grads = pv.input_grad.value();
  result.input_grad_norms = pv.norms.value();
  for (const Var& g : grad(pv.penalty, params)) result.param_grads.push_back(g.value());
  return result;
}

}  // namespace wmi::ad
