// Copyright 2026 The AQA Desk Authors.
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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace aqa::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major float64 tensor. Most graph primitives work on rank-2
// tensors; a scalar is any tensor with exactly one element.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
  static Tensor row(std::vector<double> values);
  static Tensor column(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }
  bool is_scalar() const { return data_.size() == 1; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  void fill(double v);
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

using Gradients = std::map<std::string, Tensor>;

// Named leaf tensors. Iteration order is by name, which fixes the order of
// checkpoint entries and gradient reductions.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  const std::map<std::string, Tensor>& entries() const { return entries_; }
  std::map<std::string, Tensor>& entries() { return entries_; }
  std::size_t total_size() const;

  // this += scale * grads, for every named gradient.
  void axpy(double scale, const Gradients& grads);
  Gradients zeros_like() const;

  bool operator==(const ParameterStore&) const = default;

 private:
  std::map<std::string, Tensor> entries_;
};

void accumulate(Gradients& into, const Gradients& from, double scale = 1.0);
double global_norm(const Gradients& grads);
bool all_finite(const Gradients& grads);

// Adam with bias correction. step() descends along `grads`.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParameterStore& params, const Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  Gradients m_, v_;
};

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

using ForwardFn = std::function<void(std::span<const Tensor* const> in, Tensor& out)>;
using BackwardFn = std::function<void(std::span<const Tensor* const> in, const Tensor& out,
                                      const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

/// Define-by-run computation graph. Operations evaluate eagerly as they are
/// recorded; the recorded tape can be replayed by forward(), which is what
/// finite-difference checking relies on. Nodes are stored in creation order,
/// so the tape is topologically sorted by construction.
class Graph {
 public:
  explicit Graph(ParameterStore* params = nullptr) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf bound to the store entry; repeated calls return the same node.
  Var param(const std::string& name);
  Var constant(Tensor value);
  // Named input leaf; rebound by forward().
  Var input(const std::string& name, Tensor value);

  Var record(const std::string& op, std::vector<Var> inputs, Shape out_shape, ForwardFn forward,
             BackwardFn backward);

  /// Re-evaluates every node in tape order, re-reading parameters from the
  /// store and rebinding the named inputs given.
  void forward(const std::map<std::string, Tensor>& inputs = {});

  /// Reverse sweep from a one-element loss. Returns d loss / d p for every
  /// parameter in the store (zero for parameters the graph never touched).
  Gradients backward(Var loss);

  /// Central-difference check of backward() over every store entry:
  /// max |analytic - numeric| / max(floor, |analytic| + |numeric|). The floor
  /// keeps entries whose true value is zero, where both sides are rounding
  /// noise, from reporting a relative error of one.
  double grad_check(Var loss, double eps = 1e-5, double floor = 1e-12);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  ParameterStore* params() const { return params_; }
  std::string describe(std::size_t id) const;

 private:
  enum class Kind { kConstant, kInput, kParameter, kOp };
  struct Node {
    Kind kind = Kind::kConstant;
    std::string label;
    std::vector<std::size_t> inputs;
    Tensor value;
    ForwardFn forward;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Node node);
  void evaluate(Node& node);

  ParameterStore* params_;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> param_nodes_;
};

// Primitives. Shape errors throw ShapeError naming the operation and node.
Var matmul(Var a, Var b);
Var add(Var a, Var b);  // same shape, or one side scalar
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise; same shape, or one side scalar
Var scale(Var a, double factor);
Var neg(Var a);
Var add_bias(Var a, Var bias);  // (n x m) + (1 x m), row-wise
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var softmax(Var a);      // over the last axis of a rank-2 tensor
Var log_softmax(Var a);  // fused, numerically stable
Var row_entropy(Var logits);  // (n x m) logits -> (n x 1) entropies of softmax rows
Var sum(Var a);
Var mean(Var a);
Var sum_cols(Var a);  // (n x m) -> (n x 1)
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var max_pool(Var a);  // max over axis 0: (n x m) -> (1 x m)
Var embedding(Var table, const std::vector<std::size_t>& ids);  // -> (|ids| x dim)
Var pick(Var a, const std::vector<std::size_t>& cols);          // a[i, cols[i]] -> (n x 1)
Var gather_rows(Var a, const std::vector<std::size_t>& rows);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace aqa::ad
