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

#ifndef GSF_NN_H_
#define GSF_NN_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gsf/autodiff.h"
#include "gsf/random.h"
#include "gsf/tensor.h"

namespace gsf {

// y = x W (+ b). W is in x out.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, bool bias, Rng& rng);

  Var forward(Graph& g, Var x);
  Tensor predict(const Tensor& x) const;

  std::size_t in_features() const { return weight_.value.nrows(); }
  std::size_t out_features() const { return weight_.value.ncols(); }
  bool has_bias() const { return has_bias_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }
  void collect(std::vector<Parameter*>& out);

 private:
  Parameter weight_;
  Parameter bias_;
  bool has_bias_ = true;
};

// Stack of Linear layers with ReLU between them. `sizes` lists the widths
// from input to output; sizes.size() == 1 gives the identity map.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Rng& rng,
      bool bias = true, bool relu_last = false);

  Var forward(Graph& g, Var x);
  Tensor predict(const Tensor& x) const;

  std::size_t in_features() const { return sizes_.front(); }
  std::size_t out_features() const { return sizes_.back(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<Parameter*> parameters();

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Linear> layers_;
  bool relu_last_ = false;
};

// target <- rate * online + (1 - rate) * target, parameter by parameter.
void ema_update(std::span<Parameter* const> target, std::span<Parameter* const> online,
                double rate);

void zero_grads(std::span<Parameter* const> params);

}  // namespace gsf

#endif  // GSF_NN_H_
