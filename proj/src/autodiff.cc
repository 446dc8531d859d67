// Copyright 2026 The GSF Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gsf/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsf/error.h"

namespace gsf {
namespace {

constexpr double kNormFloor = 1e-12;

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " expects a rank-2 tensor, got " + t.shape_string());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void require_axis(int axis, const char* op) {
  if (axis != 0 && axis != 1) {
    throw ShapeError(std::string(op) + ": axis must be 0 or 1, got " + std::to_string(axis));
  }
}

// Strided view of a rank-2 tensor as `groups` slices of `len` entries along
// the reduction axis.
struct AxisView {
  std::size_t groups, len, group_stride, elem_stride;
  std::size_t at(std::size_t g, std::size_t k) const { return g * group_stride + k * elem_stride; }
};

AxisView axis_view(const Tensor& t, int axis) {
  const std::size_t r = t.nrows(), c = t.ncols();
  if (axis == 1) return {r, c, c, 1};
  return {c, r, 1, c};
}

}  // namespace

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  n.op = "param";
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::make_node(Tensor value, std::vector<int> parents, BackwardFn backward,
                     const char* op_name) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by op ") + op_name);
  }
  Node n;
  n.value = std::move(value);
  n.op = op_name;
  for (int p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor& Graph::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw ContractError("backward: loss belongs to another graph");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward expects a scalar loss, got " + value(loss.id()).shape_string());
  }
  grad(loss.id()).fill(1.0);
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (int i = 0; i <= loss.id(); ++i) {
    Node& n = nodes_[i];
    if (!n.param || n.grad.empty()) continue;
    if (!n.grad.all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + n.param->name + "'");
    }
    if (n.param->grad.shape() != n.grad.shape()) n.param->grad = Tensor(n.grad.shape(), 0.0);
    n.param->grad += n.grad;
  }
}

// ---- ops ------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = *a.graph();
  Tensor out = matmul(a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return g.make_node(
      std::move(out), {ia, ib},
      [ia, ib](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        if (g.requires_grad(ia)) g.grad(ia) += matmul(go, g.value(ib), false, true);
        if (g.requires_grad(ib)) g.grad(ib) += matmul(g.value(ia), go, true, false);
      },
      "matmul");
}

namespace {

Var add_impl(Var a, Var b, double sign, const char* op) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, op);
  require_rank2(bv, op);
  const bool broadcast = av.shape() != bv.shape();
  if (broadcast && !(bv.nrows() == 1 && bv.ncols() == av.ncols())) {
    throw ShapeError(std::string(op) + " shape mismatch: " + av.shape_string() + " vs " +
                     bv.shape_string());
  }
  Tensor out = av;
  const std::size_t c = av.ncols();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += sign * (broadcast ? bv[i % c] : bv[i]);
  }
  const int ia = a.id(), ib = b.id();
  return g.make_node(
      std::move(out), {ia, ib},
      [ia, ib, broadcast, sign, c](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        if (g.requires_grad(ia)) g.grad(ia) += go;
        if (g.requires_grad(ib)) {
          Tensor& gb = g.grad(ib);
          for (std::size_t i = 0; i < go.size(); ++i) {
            gb[broadcast ? i % c : i] += sign * go[i];
          }
        }
      },
      op);
}

}  // namespace

Var add(Var a, Var b) { return add_impl(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_impl(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  Graph& g = *a.graph();
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const int ia = a.id(), ib = b.id();
  return g.make_node(
      std::move(out), {ia, ib},
      [ia, ib](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        if (g.requires_grad(ia)) {
          Tensor& ga = g.grad(ia);
          const Tensor& bv = g.value(ib);
          for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
        }
        if (g.requires_grad(ib)) {
          Tensor& gb = g.grad(ib);
          const Tensor& av = g.value(ia);
          for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
        }
      },
      "mul");
}

Var mul_const(Var a, const Tensor& c) {
  Graph& g = *a.graph();
  require_same_shape(a.value(), c, "mul_const");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia, c](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c[i];
      },
      "mul_const");
}

Var scale(Var a, double s) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia, s](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += s * go[i];
      },
      "scale");
}

Var add_scalar(Var a, double s) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (double& v : out.data()) v += s;
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia](Graph& g, int self) { g.grad(ia) += g.grad(self); }, "add_scalar");
}

Var relu(Var a) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& av = g.value(ia);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < go.size(); ++i) {
          if (av[i] > 0.0) ga[i] += go[i];
        }
      },
      "relu");
}

Var square(Var a) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (double& v : out.data()) v *= v;
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& av = g.value(ia);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += 2.0 * av[i] * go[i];
      },
      "square");
}

Var log_softmax(Var a, int axis) {
  Graph& g = *a.graph();
  require_axis(axis, "log_softmax");
  const Tensor& av = a.value();
  require_rank2(av, "log_softmax");
  const AxisView v = axis_view(av, axis);
  Tensor out = av;
  for (std::size_t grp = 0; grp < v.groups; ++grp) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < v.len; ++k) m = std::max(m, av[v.at(grp, k)]);
    double s = 0.0;
    for (std::size_t k = 0; k < v.len; ++k) s += std::exp(av[v.at(grp, k)] - m);
    const double lse = m + std::log(s);
    for (std::size_t k = 0; k < v.len; ++k) out[v.at(grp, k)] = av[v.at(grp, k)] - lse;
  }
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia, v](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& y = g.value(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t grp = 0; grp < v.groups; ++grp) {
          double gsum = 0.0;
          for (std::size_t k = 0; k < v.len; ++k) gsum += go[v.at(grp, k)];
          for (std::size_t k = 0; k < v.len; ++k) {
            const std::size_t i = v.at(grp, k);
            ga[i] += go[i] - std::exp(y[i]) * gsum;
          }
        }
      },
      "log_softmax");
}

Var logsumexp(Var a, int axis) {
  Graph& g = *a.graph();
  require_axis(axis, "logsumexp");
  const Tensor& av = a.value();
  require_rank2(av, "logsumexp");
  const AxisView v = axis_view(av, axis);
  Tensor out = axis == 1 ? Tensor::matrix(av.nrows(), 1) : Tensor::matrix(1, av.ncols());
  for (std::size_t grp = 0; grp < v.groups; ++grp) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < v.len; ++k) m = std::max(m, av[v.at(grp, k)]);
    double s = 0.0;
    for (std::size_t k = 0; k < v.len; ++k) s += std::exp(av[v.at(grp, k)] - m);
    out[grp] = m + std::log(s);
  }
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia, v](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& y = g.value(self);
        const Tensor& av = g.value(ia);
        Tensor& ga = g.grad(ia);
        for (std::size_t grp = 0; grp < v.groups; ++grp) {
          for (std::size_t k = 0; k < v.len; ++k) {
            const std::size_t i = v.at(grp, k);
            ga[i] += go[grp] * std::exp(av[i] - y[grp]);
          }
        }
      },
      "logsumexp");
}

Var mean(Var a) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  if (av.empty()) throw ShapeError("mean of empty tensor " + av.shape_string());
  double s = 0.0;
  for (double x : av.data()) s += x;
  const double n = static_cast<double>(av.size());
  const int ia = a.id();
  return g.make_node(
      Tensor::scalar(s / n), {ia},
      [ia, n](Graph& g, int self) {
        const double go = g.grad(self)[0] / n;
        for (double& x : g.grad(ia).data()) x += go;
      },
      "mean");
}

Var sum(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const int ia = a.id();
  return g.make_node(
      Tensor::scalar(s), {ia},
      [ia](Graph& g, int self) {
        const double go = g.grad(self)[0];
        for (double& x : g.grad(ia).data()) x += go;
      },
      "sum");
}

Var sum_rows(Var a) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  require_rank2(av, "sum_rows");
  const std::size_t r = av.nrows(), c = av.ncols();
  Tensor out = Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += av(i, j);
    out[i] = s;
  }
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia, r, c](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) ga(i, j) += go[i];
        }
      },
      "sum_rows");
}

Var cosine_similarity(Var a, Var b) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "cosine_similarity");
  require_same_shape(av, bv, "cosine_similarity");
  const std::size_t r = av.nrows(), c = av.ncols();
  Tensor out = Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      dot += av(i, j) * bv(i, j);
      na += av(i, j) * av(i, j);
      nb += bv(i, j) * bv(i, j);
    }
    out[i] = dot / (std::max(std::sqrt(na), kNormFloor) * std::max(std::sqrt(nb), kNormFloor));
  }
  const int ia = a.id(), ib = b.id();
  return g.make_node(
      std::move(out), {ia, ib},
      [ia, ib, r, c](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& y = g.value(self);
        const Tensor& av = g.value(ia);
        const Tensor& bv = g.value(ib);
        const bool ra = g.requires_grad(ia), rb = g.requires_grad(ib);
        for (std::size_t i = 0; i < r; ++i) {
          double na = 0.0, nb = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            na += av(i, j) * av(i, j);
            nb += bv(i, j) * bv(i, j);
          }
          na = std::max(std::sqrt(na), kNormFloor);
          nb = std::max(std::sqrt(nb), kNormFloor);
          for (std::size_t j = 0; j < c; ++j) {
            if (ra) {
              g.grad(ia)(i, j) += go[i] * (bv(i, j) / (na * nb) - y[i] * av(i, j) / (na * na));
            }
            if (rb) {
              g.grad(ib)(i, j) += go[i] * (av(i, j) / (na * nb) - y[i] * bv(i, j) / (nb * nb));
            }
          }
        }
      },
      "cosine_similarity");
}

Var normalize_rows(Var a) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  require_rank2(av, "normalize_rows");
  const std::size_t r = av.nrows(), c = av.ncols();
  Tensor out = av;
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double n = 0.0;
    for (std::size_t j = 0; j < c; ++j) n += av(i, j) * av(i, j);
    norms[i] = std::max(std::sqrt(n), kNormFloor);
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= norms[i];
  }
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia, r, c, norms](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& u = g.value(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < r; ++i) {
          double ug = 0.0;
          for (std::size_t j = 0; j < c; ++j) ug += u(i, j) * go(i, j);
          for (std::size_t j = 0; j < c; ++j) {
            ga(i, j) += (go(i, j) - u(i, j) * ug) / norms[i];
          }
        }
      },
      "normalize_rows");
}

Var l1_norm(Var a) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  require_rank2(av, "l1_norm");
  const std::size_t r = av.nrows(), c = av.ncols();
  Tensor out = Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::abs(av(i, j));
    out[i] = s;
  }
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia, r, c](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& av = g.value(ia);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const double x = av(i, j);
            ga(i, j) += go[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
          }
        }
      },
      "l1_norm");
}

Var transpose(Var a) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  require_rank2(av, "transpose");
  const std::size_t r = av.nrows(), c = av.ncols();
  Tensor out = Tensor::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out(j, i) = av(i, j);
  }
  const int ia = a.id();
  return g.make_node(
      std::move(out), {ia},
      [ia, r, c](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) ga(i, j) += go(j, i);
        }
      },
      "transpose");
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  require_rank2(av, "gather_rows");
  const std::size_t c = av.ncols();
  Tensor out = Tensor::matrix(rows.size(), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.nrows()) {
      throw ShapeError("gather_rows index " + std::to_string(rows[i]) + " out of range for " +
                       av.shape_string());
    }
    std::copy_n(av.data().begin() + rows[i] * c, c, out.data().begin() + i * c);
  }
  const int ia = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return g.make_node(
      std::move(out), {ia},
      [ia, c, idx = std::move(idx)](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < c; ++j) ga(idx[i], j) += go(i, j);
        }
      },
      "gather_rows");
}

Var pick(Var a, std::span<const std::size_t> cols) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  require_rank2(av, "pick");
  if (cols.size() != av.nrows()) {
    throw ShapeError("pick: " + std::to_string(cols.size()) + " indices for " +
                     av.shape_string());
  }
  Tensor out = Tensor::matrix(av.nrows(), 1);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] >= av.ncols()) {
      throw ShapeError("pick index " + std::to_string(cols[i]) + " out of range for " +
                       av.shape_string());
    }
    out[i] = av(i, cols[i]);
  }
  const int ia = a.id();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return g.make_node(
      std::move(out), {ia},
      [ia, idx = std::move(idx)](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t i = 0; i < idx.size(); ++i) ga(i, idx[i]) += go[i];
      },
      "pick");
}

Var gather_flat(Var a, std::span<const std::size_t> idx) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(1, idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= av.size()) {
      throw ShapeError("gather_flat index " + std::to_string(idx[j]) + " out of range for " +
                       av.shape_string());
    }
    out[j] = av[idx[j]];
  }
  const int ia = a.id();
  std::vector<std::size_t> copy(idx.begin(), idx.end());
  return g.make_node(
      std::move(out), {ia},
      [ia, copy = std::move(copy)](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        Tensor& ga = g.grad(ia);
        for (std::size_t j = 0; j < copy.size(); ++j) ga[copy[j]] += go[j];
      },
      "gather_flat");
}

}  // namespace gsf
