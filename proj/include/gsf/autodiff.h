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

// Tape-based reverse-mode automatic differentiation over rank-2 tensors.
//
// A Graph is built fresh for every minibatch. Nodes are appended in
// evaluation order, so the tape order is already a topological order and
// backward() is a single reverse sweep. Trainable tensors live in Parameter
// objects owned by the caller; Graph::param() references them and backward()
// accumulates into Parameter::grad.

#ifndef GSF_AUTODIFF_H_
#define GSF_AUTODIFF_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gsf/tensor.h"

namespace gsf {

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Graph;

// Lightweight handle to a graph node.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  // Propagates the node's gradient (grad(self)) into its parents.
  using BackwardFn = std::function<void(Graph& g, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var param(Parameter& p);

  // Extension point for op authors: records a node whose value was computed
  // by the caller. Forward values are checked for NaN/Inf here.
  Var make_node(Tensor value, std::vector<int> parents, BackwardFn backward,
                const char* op_name);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient slot of a node, allocated (zeroed) on first use.
  Tensor& grad(int id);
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a 1x1 loss. Accumulates into Parameter::grad of every
  // referenced parameter. Throws NumericError on any non-finite gradient.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    const char* op = "";
  };
  std::vector<Node> nodes_;
};

// ---- Registered ops -------------------------------------------------------
// All ops take rank-2 inputs unless noted and throw ShapeError naming both
// shapes on mismatch.

Var matmul(Var a, Var b);
// Elementwise a + b; b may also be a 1xC row broadcast over the rows of a.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
Var square(Var a);
// Elementwise product with a constant tensor of the same shape.
Var mul_const(Var a, const Tensor& c);
// Max-subtracted log-softmax / log-sum-exp along axis 0 (columns) or 1 (rows).
// logsumexp reduces the axis: axis=1 gives Rx1, axis=0 gives 1xC.
Var log_softmax(Var a, int axis = 1);
Var logsumexp(Var a, int axis = 1);
Var mean(Var a);      // 1x1
Var sum(Var a);       // 1x1
Var sum_rows(Var a);  // Rx1, sums each row
// Row-wise cosine similarity of two equally shaped matrices, Rx1.
Var cosine_similarity(Var a, Var b);
// Row-wise L2 normalisation.
Var normalize_rows(Var a);
// Row-wise L1 norm, Rx1.
Var l1_norm(Var a);
Var transpose(Var a);
// Selects rows (with repetition) from a.
Var gather_rows(Var a, std::span<const std::size_t> rows);
// Rx1 tensor holding a(i, cols[i]).
Var pick(Var a, std::span<const std::size_t> cols);
// 1xN row holding flat entries a.data()[idx[j]].
Var gather_flat(Var a, std::span<const std::size_t> idx);

}  // namespace gsf

#endif  // GSF_AUTODIFF_H_
