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

#include "gsf/nn.h"

#include <cmath>

#include "gsf/error.h"

namespace gsf {

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, bool bias,
               Rng& rng)
    : has_bias_(bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor w = Tensor::matrix(in, out);
  for (double& v : w.data()) v = u(rng);
  weight_ = Parameter(name + ".weight", std::move(w));
  Tensor b = Tensor::matrix(1, out);
  if (bias) {
    for (double& v : b.data()) v = u(rng);
  }
  bias_ = Parameter(name + ".bias", std::move(b));
}

Var Linear::forward(Graph& g, Var x) {
  Var y = matmul(x, g.param(weight_));
  return has_bias_ ? add(y, g.param(bias_)) : y;
}

Tensor Linear::predict(const Tensor& x) const {
  Tensor y = matmul(x, weight_.value);
  if (has_bias_) {
    const std::size_t c = y.ncols();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bias_.value[i % c];
  }
  return y;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Rng& rng, bool bias,
         bool relu_last)
    : sizes_(sizes), relu_last_(relu_last) {
  if (sizes.empty()) throw ContractError("Mlp needs at least an input width");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers_.emplace_back(name + "." + std::to_string(i), sizes[i], sizes[i + 1], bias, rng);
  }
}

Var Mlp::forward(Graph& g, Var x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(g, x);
    if (i + 1 < layers_.size() || relu_last_) x = relu(x);
  }
  return x;
}

Tensor Mlp::predict(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].predict(h);
    if (i + 1 < layers_.size() || relu_last_) {
      for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
    }
  }
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) l.collect(out);
  return out;
}

void ema_update(std::span<Parameter* const> target, std::span<Parameter* const> online,
                double rate) {
  if (target.size() != online.size()) {
    throw ContractError("ema_update: parameter lists differ in length");
  }
  for (std::size_t p = 0; p < target.size(); ++p) {
    Tensor& t = target[p]->value;
    const Tensor& o = online[p]->value;
    if (t.shape() != o.shape()) {
      throw ShapeError("ema_update shape mismatch for " + target[p]->name + ": " +
                       t.shape_string() + " vs " + o.shape_string());
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rate * o[i] + (1.0 - rate) * t[i];
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (p->grad.shape() != p->value.shape()) p->grad = Tensor(p->value.shape(), 0.0);
    p->zero_grad();
  }
}

}  // namespace gsf
