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

#include "aqa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "aqa/error.hpp"

namespace aqa::ad {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

namespace {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != numel(shape_))
    throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n, 1}, std::move(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& ParameterStore::add(const std::string& name, Tensor init) {
  auto [it, inserted] = entries_.emplace(name, std::move(init));
  if (!inserted) throw PreconditionError("duplicate parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw PreconditionError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw PreconditionError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void ParameterStore::axpy(double scale, const Gradients& grads) {
  for (const auto& [name, g] : grads) {
    Tensor& p = at(name);
    if (p.shape() != g.shape())
      throw ShapeError("gradient for '" + name + "' has shape " + shape_string(g.shape()));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += scale * g[i];
  }
}

Gradients ParameterStore::zeros_like() const {
  Gradients out;
  for (const auto& [name, t] : entries_) out.emplace(name, Tensor(t.shape()));
  return out;
}

void accumulate(Gradients& into, const Gradients& from, double scale) {
  for (const auto& [name, g] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      Tensor t(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) t[i] = scale * g[i];
      into.emplace(name, std::move(t));
      continue;
    }
    Tensor& dst = it->second;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
  }
}

double global_norm(const Gradients& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) s += v * v;
  return std::sqrt(s);
}

bool all_finite(const Gradients& grads) {
  for (const auto& [name, g] : grads)
    if (!g.all_finite()) return false;
  return true;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(learning_rate > 0.0)) throw PreconditionError("adam: learning rate must be positive");
}

void Adam::step(ParameterStore& params, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mi, fresh_m] = m_.try_emplace(name, Tensor(g.shape()));
    auto [vi, fresh_v] = v_.try_emplace(name, Tensor(g.shape()));
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(const std::string& name) {
  if (!params_) throw PreconditionError("graph has no parameter store");
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var(this, it->second);
  Node node;
  node.kind = Kind::kParameter;
  node.label = name;
  node.value = params_->at(name);
  node.requires_grad = true;
  Var v = push(std::move(node));
  param_nodes_.emplace(name, v.id());
  return v;
}

Var Graph::constant(Tensor value) {
  Node node;
  node.kind = Kind::kConstant;
  node.label = "const";
  node.value = std::move(value);
  return push(std::move(node));
}

Var Graph::input(const std::string& name, Tensor value) {
  Node node;
  node.kind = Kind::kInput;
  node.label = name;
  node.value = std::move(value);
  return push(std::move(node));
}

std::string Graph::describe(std::size_t id) const {
  return "node " + std::to_string(id) + " (" + nodes_.at(id).label + ")";
}

Var Graph::record(const std::string& op, std::vector<Var> inputs, Shape out_shape,
                  ForwardFn forward, BackwardFn backward) {
  Node node;
  node.kind = Kind::kOp;
  node.label = op;
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (&v.graph() != this) throw PreconditionError(op + ": input from another graph");
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  node.value = Tensor(std::move(out_shape));
  node.forward = std::move(forward);
  node.backward = std::move(backward);
  evaluate(node);
  return push(std::move(node));
}

void Graph::evaluate(Node& node) {
  std::vector<const Tensor*> in;
  in.reserve(node.inputs.size());
  for (std::size_t id : node.inputs) in.push_back(&nodes_[id].value);
  node.forward(in, node.value);
}

void Graph::forward(const std::map<std::string, Tensor>& inputs) {
  for (Node& node : nodes_) {
    switch (node.kind) {
      case Kind::kConstant:
        break;
      case Kind::kParameter:
        node.value = params_->at(node.label);
        break;
      case Kind::kInput:
        if (auto it = inputs.find(node.label); it != inputs.end()) {
          if (it->second.shape() != node.value.shape())
            throw ShapeError("input '" + node.label + "' rebound with shape " +
                             shape_string(it->second.shape()) + ", expected " +
                             shape_string(node.value.shape()));
          node.value = it->second;
        }
        break;
      case Kind::kOp:
        evaluate(node);
        break;
    }
  }
}

Gradients Graph::backward(Var loss) {
  if (&loss.graph() != this) throw PreconditionError("backward: loss from another graph");
  if (!nodes_[loss.id()].value.is_scalar())
    throw ShapeError("backward: loss " + describe(loss.id()) + " has shape " +
                     shape_string(nodes_[loss.id()].value.shape()) + ", expected a scalar");
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id()] = Tensor(nodes_[loss.id()].value.shape(), 1.0);

  std::vector<const Tensor*> in;
  std::vector<Tensor*> gin;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.kind != Kind::kOp || !node.requires_grad || grads[id].size() == 0) continue;
    in.clear();
    gin.clear();
    for (std::size_t src : node.inputs) {
      in.push_back(&nodes_[src].value);
      if (nodes_[src].requires_grad) {
        if (grads[src].size() == 0) grads[src] = Tensor(nodes_[src].value.shape());
        gin.push_back(&grads[src]);
      } else {
        gin.push_back(nullptr);
      }
    }
    node.backward(in, node.value, grads[id], gin);
  }

  Gradients out;
  if (params_) out = params_->zeros_like();
  for (const auto& [name, id] : param_nodes_)
    if (grads[id].size() != 0) out[name] = std::move(grads[id]);
  return out;
}

double Graph::grad_check(Var loss, double eps, double floor) {
  if (!(eps > 0.0)) throw PreconditionError("grad_check: eps must be positive");
  if (!(floor > 0.0)) throw PreconditionError("grad_check: floor must be positive");
  if (!params_) throw PreconditionError("grad_check: graph has no parameter store");
  forward();
  auto check_finite = [&] {
    for (std::size_t id = 0; id < nodes_.size(); ++id)
      if (!nodes_[id].value.all_finite())
        throw NumericError("grad_check: non-finite value at " + describe(id));
  };
  check_finite();
  const Gradients analytic = backward(loss);

  double worst = 0.0;
  for (const auto& [name, id] : param_nodes_) {
    Tensor& p = params_->at(name);
    const Tensor& g = analytic.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      forward();
      check_finite();
      const double up = nodes_[loss.id()].value.item();
      p[i] = saved - eps;
      forward();
      check_finite();
      const double down = nodes_[loss.id()].value.item();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err =
          std::abs(g[i] - numeric) / std::max(floor, std::abs(g[i]) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  forward();
  return worst;
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

[[noreturn]] void shape_fail(Graph& g, const std::string& op, const std::string& detail) {
  throw ShapeError(op + " at node " + std::to_string(g.size()) + ": " + detail);
}

void require_rank2(Graph& g, const std::string& op, const Var& v) {
  if (v.value().rank() != 2)
    shape_fail(g, op, "expected rank-2 input, got " + shape_string(v.shape()));
}

Graph& same_graph(const std::string& op, const Var& a, const Var& b) {
  if (&a.graph() != &b.graph()) throw PreconditionError(op + ": inputs from different graphs");
  return a.graph();
}

template <typename F, typename DF>
Var unary(const std::string& op, Var a, F f, DF df_from_out) {
  return a.graph().record(
      op, {a}, a.shape(),
      [f](std::span<const Tensor* const> in, Tensor& out) {
        const Tensor& x = *in[0];
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
      },
      [df_from_out](std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                    std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        const Tensor& x = *in[0];
        Tensor& gx = *gin[0];
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gout[i] * df_from_out(x[i], out[i]);
      });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph("matmul", a, b);
  require_rank2(g, "matmul", a);
  require_rank2(g, "matmul", b);
  const std::size_t n = a.value().rows(), k = a.value().cols(), m = b.value().cols();
  if (b.value().rows() != k)
    shape_fail(g, "matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
  return g.record(
      "matmul", {a, b}, {n, m},
      [n, k, m](std::span<const Tensor* const> in, Tensor& out) {
        const double* A = in[0]->data();
        const double* B = in[1]->data();
        double* C = out.data();
        std::fill(C, C + n * m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          double* crow = C + i * m;
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = B + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
          }
        }
      },
      [n, k, m](std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                std::span<Tensor* const> gin) {
        const double* A = in[0]->data();
        const double* B = in[1]->data();
        const double* G = gout.data();
        if (gin[0]) {
          double* GA = gin[0]->data();
          for (std::size_t i = 0; i < n; ++i) {
            const double* grow = G + i * m;
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = B + p * m;
              double s = 0.0;
              for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
              GA[i * k + p] += s;
            }
          }
        }
        if (gin[1]) {
          double* GB = gin[1]->data();
          for (std::size_t i = 0; i < n; ++i) {
            const double* grow = G + i * m;
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = A[i * k + p];
              if (aip == 0.0) continue;
              double* gbrow = GB + p * m;
              for (std::size_t j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
            }
          }
        }
      });
}

namespace {

// Elementwise binary op with optional scalar broadcast on either side.
// d/da and d/db are given as functions of (a, b).
template <typename F, typename DA, typename DB>
Var binary(const std::string& op, Var a, Var b, F f, DA da, DB db) {
  Graph& g = same_graph(op, a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape shape;
  if (av.shape() == bv.shape()) {
    shape = av.shape();
  } else if (bv.is_scalar()) {
    shape = av.shape();
  } else if (av.is_scalar()) {
    shape = bv.shape();
  } else {
    shape_fail(g, op, shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  return g.record(
      op, {a, b}, shape,
      [f](std::span<const Tensor* const> in, Tensor& out) {
        const Tensor& x = *in[0];
        const Tensor& y = *in[1];
        const std::size_t sx = x.size() == 1 ? 0 : 1, sy = y.size() == 1 ? 0 : 1;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i * sx], y[i * sy]);
      },
      [da, db](std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
               std::span<Tensor* const> gin) {
        const Tensor& x = *in[0];
        const Tensor& y = *in[1];
        const std::size_t sx = x.size() == 1 ? 0 : 1, sy = y.size() == 1 ? 0 : 1;
        for (std::size_t i = 0; i < out.size(); ++i) {
          const double xi = x[i * sx], yi = y[i * sy];
          if (gin[0]) (*gin[0])[i * sx] += gout[i] * da(xi, yi);
          if (gin[1]) (*gin[1])[i * sy] += gout[i] * db(xi, yi);
        }
      });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var add_bias(Var a, Var bias) {
  Graph& g = same_graph("add_bias", a, bias);
  require_rank2(g, "add_bias", a);
  const std::size_t n = a.value().rows(), m = a.value().cols();
  if (bias.value().size() != m)
    shape_fail(g, "add_bias", shape_string(a.shape()) + " + " + shape_string(bias.shape()));
  return g.record(
      "add_bias", {a, bias}, {n, m},
      [n, m](std::span<const Tensor* const> in, Tensor& out) {
        const double* x = in[0]->data();
        const double* b = in[1]->data();
        double* o = out.data();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) o[i * m + j] = x[i * m + j] + b[j];
      },
      [n, m](std::span<const Tensor* const>, const Tensor&, const Tensor& gout,
             std::span<Tensor* const> gin) {
        if (gin[0])
          for (std::size_t i = 0; i < n * m; ++i) (*gin[0])[i] += gout[i];
        if (gin[1])
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) (*gin[1])[j] += gout[i * m + j];
      });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

namespace {

void softmax_rows(const Tensor& x, Tensor& out, bool log_space) {
  const std::size_t n = x.rows(), m = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* xr = x.data() + i * m;
    double* o = out.data() + i * m;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::exp(xr[j] - mx);
    if (log_space) {
      const double lse = mx + std::log(s);
      for (std::size_t j = 0; j < m; ++j) o[j] = xr[j] - lse;
    } else {
      for (std::size_t j = 0; j < m; ++j) o[j] = std::exp(xr[j] - mx) / s;
    }
  }
}

}  // namespace

Var softmax(Var a) {
  Graph& g = a.graph();
  require_rank2(g, "softmax", a);
  const std::size_t n = a.value().rows(), m = a.value().cols();
  return g.record(
      "softmax", {a}, a.shape(),
      [](std::span<const Tensor* const> in, Tensor& out) { softmax_rows(*in[0], out, false); },
      [n, m](std::span<const Tensor* const>, const Tensor& out, const Tensor& gout,
             std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < n; ++i) {
          const double* y = out.data() + i * m;
          const double* gy = gout.data() + i * m;
          double dot = 0.0;
          for (std::size_t j = 0; j < m; ++j) dot += y[j] * gy[j];
          double* gx = gin[0]->data() + i * m;
          for (std::size_t j = 0; j < m; ++j) gx[j] += y[j] * (gy[j] - dot);
        }
      });
}

Var log_softmax(Var a) {
  Graph& g = a.graph();
  require_rank2(g, "log_softmax", a);
  const std::size_t n = a.value().rows(), m = a.value().cols();
  return g.record(
      "log_softmax", {a}, a.shape(),
      [](std::span<const Tensor* const> in, Tensor& out) { softmax_rows(*in[0], out, true); },
      [n, m](std::span<const Tensor* const>, const Tensor& out, const Tensor& gout,
             std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < n; ++i) {
          const double* y = out.data() + i * m;
          const double* gy = gout.data() + i * m;
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += gy[j];
          double* gx = gin[0]->data() + i * m;
          for (std::size_t j = 0; j < m; ++j) gx[j] += gy[j] - std::exp(y[j]) * s;
        }
      });
}

Var row_entropy(Var logits) {
  Graph& g = logits.graph();
  require_rank2(g, "row_entropy", logits);
  const std::size_t n = logits.value().rows(), m = logits.value().cols();
  return g.record(
      "row_entropy", {logits}, {n, 1},
      [n, m](std::span<const Tensor* const> in, Tensor& out) {
        Tensor lp(in[0]->shape());
        softmax_rows(*in[0], lp, true);
        for (std::size_t i = 0; i < n; ++i) {
          double h = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            const double l = lp(i, j);
            h -= std::exp(l) * l;
          }
          out[i] = h;
        }
      },
      [n, m](std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
             std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        Tensor lp(in[0]->shape());
        softmax_rows(*in[0], lp, true);
        // dH/dz_j = -p_j (log p_j + H)
        for (std::size_t i = 0; i < n; ++i) {
          const double h = out[i];
          for (std::size_t j = 0; j < m; ++j) {
            const double l = lp(i, j);
            (*gin[0])(i, j) += gout[i] * (-std::exp(l) * (l + h));
          }
        }
      });
}

Var sum(Var a) {
  return a.graph().record(
      "sum", {a}, {1, 1},
      [](std::span<const Tensor* const> in, Tensor& out) {
        double s = 0.0;
        for (double v : in[0]->values()) s += v;
        out[0] = s;
      },
      [](std::span<const Tensor* const>, const Tensor&, const Tensor& gout,
         std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (double& v : gin[0]->values()) v += gout[0];
      });
}

Var mean(Var a) {
  const std::size_t count = a.value().size();
  if (count == 0) shape_fail(a.graph(), "mean", "empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(count));
}

Var sum_cols(Var a) {
  Graph& g = a.graph();
  require_rank2(g, "sum_cols", a);
  const std::size_t n = a.value().rows(), m = a.value().cols();
  return g.record(
      "sum_cols", {a}, {n, 1},
      [n, m](std::span<const Tensor* const> in, Tensor& out) {
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += (*in[0])(i, j);
          out[i] = s;
        }
      },
      [n, m](std::span<const Tensor* const>, const Tensor&, const Tensor& gout,
             std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) (*gin[0])(i, j) += gout[i];
      });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw PreconditionError("concat: no inputs");
  Graph& g = parts.front().graph();
  if (axis > 1) shape_fail(g, "concat", "axis must be 0 or 1");
  for (const Var& v : parts) require_rank2(g, "concat", v);
  std::vector<std::size_t> extents;
  std::size_t rows = parts[0].value().rows(), cols = parts[0].value().cols();
  std::size_t total = 0;
  for (const Var& v : parts) {
    const std::size_t fixed = axis == 0 ? v.value().cols() : v.value().rows();
    if (fixed != (axis == 0 ? cols : rows))
      shape_fail(g, "concat", "mismatched extent " + shape_string(v.shape()));
    const std::size_t e = axis == 0 ? v.value().rows() : v.value().cols();
    extents.push_back(e);
    total += e;
  }
  const Shape shape = axis == 0 ? Shape{total, cols} : Shape{rows, total};
  const std::size_t out_cols = shape[1];
  return g.record(
      "concat", parts, shape,
      [axis, extents, out_cols](std::span<const Tensor* const> in, Tensor& out) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < in.size(); ++p) {
          const Tensor& t = *in[p];
          for (std::size_t i = 0; i < t.rows(); ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) {
              const std::size_t r = axis == 0 ? offset + i : i;
              const std::size_t c = axis == 0 ? j : offset + j;
              out[r * out_cols + c] = t(i, j);
            }
          offset += extents[p];
        }
      },
      [axis, extents, out_cols](std::span<const Tensor* const> in, const Tensor&,
                                const Tensor& gout, std::span<Tensor* const> gin) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < in.size(); ++p) {
          if (gin[p]) {
            Tensor& gt = *gin[p];
            for (std::size_t i = 0; i < gt.rows(); ++i)
              for (std::size_t j = 0; j < gt.cols(); ++j) {
                const std::size_t r = axis == 0 ? offset + i : i;
                const std::size_t c = axis == 0 ? j : offset + j;
                gt(i, j) += gout[r * out_cols + c];
              }
          }
          offset += extents[p];
        }
      });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Graph& g = a.graph();
  require_rank2(g, "slice", a);
  if (axis > 1) shape_fail(g, "slice", "axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? a.value().rows() : a.value().cols();
  if (begin > end || end > extent)
    shape_fail(g, "slice", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                               ") outside " + shape_string(a.shape()));
  const std::size_t in_cols = a.value().cols();
  const Shape shape = axis == 0 ? Shape{end - begin, in_cols} : Shape{a.value().rows(), end - begin};
  return g.record(
      "slice", {a}, shape,
      [axis, begin, in_cols](std::span<const Tensor* const> in, Tensor& out) {
        for (std::size_t i = 0; i < out.rows(); ++i)
          for (std::size_t j = 0; j < out.cols(); ++j) {
            const std::size_t r = axis == 0 ? begin + i : i;
            const std::size_t c = axis == 0 ? j : begin + j;
            out(i, j) = (*in[0])[r * in_cols + c];
          }
      },
      [axis, begin, in_cols](std::span<const Tensor* const>, const Tensor& out,
                             const Tensor& gout, std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < out.rows(); ++i)
          for (std::size_t j = 0; j < out.cols(); ++j) {
            const std::size_t r = axis == 0 ? begin + i : i;
            const std::size_t c = axis == 0 ? j : begin + j;
            (*gin[0])[r * in_cols + c] += gout(i, j);
          }
      });
}

Var max_pool(Var a) {
  Graph& g = a.graph();
  require_rank2(g, "max_pool", a);
  const std::size_t n = a.value().rows(), m = a.value().cols();
  if (n == 0) shape_fail(g, "max_pool", "no rows to pool");
  // First maximal row wins ties; the same row receives the gradient.
  auto argmax = [n, m](const Tensor& x, std::size_t j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (x[i * m + j] > x[best * m + j]) best = i;
    return best;
  };
  return g.record(
      "max_pool", {a}, {1, m},
      [argmax, m](std::span<const Tensor* const> in, Tensor& out) {
        for (std::size_t j = 0; j < m; ++j) out[j] = (*in[0])[argmax(*in[0], j) * m + j];
      },
      [argmax, m](std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t j = 0; j < m; ++j) (*gin[0])[argmax(*in[0], j) * m + j] += gout[j];
      });
}

Var embedding(Var table, const std::vector<std::size_t>& ids) {
  Graph& g = table.graph();
  require_rank2(g, "embedding", table);
  const std::size_t vocab = table.value().rows(), dim = table.value().cols();
  for (std::size_t id : ids)
    if (id >= vocab)
      shape_fail(g, "embedding", "id " + std::to_string(id) + " outside table of " +
                                     std::to_string(vocab) + " rows");
  return g.record(
      "embedding", {table}, {ids.size(), dim},
      [ids, dim](std::span<const Tensor* const> in, Tensor& out) {
        for (std::size_t i = 0; i < ids.size(); ++i)
          std::copy_n(in[0]->data() + ids[i] * dim, dim, out.data() + i * dim);
      },
      [ids, dim](std::span<const Tensor* const>, const Tensor&, const Tensor& gout,
                 std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          double* dst = gin[0]->data() + ids[i] * dim;
          const double* src = gout.data() + i * dim;
          for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
        }
      });
}

Var pick(Var a, const std::vector<std::size_t>& cols) {
  Graph& g = a.graph();
  require_rank2(g, "pick", a);
  const std::size_t n = a.value().rows(), m = a.value().cols();
  if (cols.size() != n) shape_fail(g, "pick", "need one column per row");
  for (std::size_t c : cols)
    if (c >= m) shape_fail(g, "pick", "column " + std::to_string(c) + " out of range");
  return g.record(
      "pick", {a}, {n, 1},
      [cols, m](std::span<const Tensor* const> in, Tensor& out) {
        for (std::size_t i = 0; i < cols.size(); ++i) out[i] = (*in[0])[i * m + cols[i]];
      },
      [cols, m](std::span<const Tensor* const>, const Tensor&, const Tensor& gout,
                std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < cols.size(); ++i) (*gin[0])[i * m + cols[i]] += gout[i];
      });
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
  Graph& g = a.graph();
  require_rank2(g, "gather_rows", a);
  const std::size_t n = a.value().rows(), m = a.value().cols();
  for (std::size_t r : rows)
    if (r >= n) shape_fail(g, "gather_rows", "row " + std::to_string(r) + " out of range");
  return g.record(
      "gather_rows", {a}, {rows.size(), m},
      [rows, m](std::span<const Tensor* const> in, Tensor& out) {
        for (std::size_t i = 0; i < rows.size(); ++i)
          std::copy_n(in[0]->data() + rows[i] * m, m, out.data() + i * m);
      },
      [rows, m](std::span<const Tensor* const>, const Tensor&, const Tensor& gout,
                std::span<Tensor* const> gin) {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t j = 0; j < m; ++j) (*gin[0])[rows[i] * m + j] += gout[i * m + j];
      });
}

}  // namespace aqa::ad
