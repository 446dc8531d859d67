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

#ifndef GSF_GRADCHECK_H_
#define GSF_GRADCHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gsf/autodiff.h"
#include "gsf/random.h"

namespace gsf {

// Builds a scalar loss on a fresh graph from the current parameter values.
using LossFn = std::function<Var(Graph&)>;

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;
  double tol = 0.0;
  bool passed = true;
};

// |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

// Compares Graph::backward against central differences with step h for
// every entry of every parameter. Parameter values are restored afterwards.
GradCheckReport gradient_check(const LossFn& f, std::span<Parameter* const> params,
                               double h = 1e-5, double tol = 1e-4);

// A randomized instance: owns its parameters and a loss over them.
struct GradCase {
  std::vector<std::unique_ptr<Parameter>> owned;
  // Parameters living inside `state` (e.g. a model) rather than in `owned`.
  std::shared_ptr<void> state;
  std::vector<Parameter*> external;
  LossFn loss;

  Parameter& add_param(const std::string& name, Tensor value);
  std::vector<Parameter*> params() const;
};

struct GradCaseFactory {
  std::string name;
  std::function<std::unique_ptr<GradCase>(Rng&)> make;
};

// One factory per registered op (plus a small MLP); shapes are drawn at random.
const std::vector<GradCaseFactory>& op_grad_cases();

// Helpers shared with other case registries.
Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                     double hi = 1.0);
// Entries with |x| in [margin, 1] and random sign, keeping clear of kinks at 0.
Tensor random_away_from_zero(Rng& rng, std::size_t rows, std::size_t cols,
                             double margin = 0.1);
// Reduces any node to a scalar through random weights drawn from `seed`, so
// every output entry contributes a distinct gradient. Same seed, same weights.
Var weighted_sum(Var v, std::uint64_t seed);

}  // namespace gsf

#endif  // GSF_GRADCHECK_H_
