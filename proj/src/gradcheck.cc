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

#include "gsf/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "gsf/error.h"
#include "gsf/nn.h"

namespace gsf {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(const LossFn& f, std::span<Parameter* const> params, double h,
                               double tol) {
  if (!(h > 0.0)) throw ContractError("gradient_check: step h must be positive");
  zero_grads(params);
  {
    Graph g;
    g.backward(f(g));
  }
  auto eval = [&f]() {
    Graph g;
    return f(g).value().item();
  };
  GradCheckReport report;
  report.tol = tol;
  for (Parameter* p : params) {
    ParamGradError pe;
    pe.name = p->name;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = eval();
      p->value[i] = orig - h;
      const double fm = eval();
      p->value[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = relative_error(p->grad[i], numeric);
      if (i == 0 || err > pe.max_rel_error) {
        pe.max_rel_error = err;
        pe.worst_index = i;
        pe.analytic = p->grad[i];
        pe.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, pe.max_rel_error);
    report.params.push_back(pe);
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

Parameter& GradCase::add_param(const std::string& name, Tensor value) {
  owned.push_back(std::make_unique<Parameter>(name, std::move(value)));
  return *owned.back();
}

std::vector<Parameter*> GradCase::params() const {
  std::vector<Parameter*> out;
  for (const auto& p : owned) out.push_back(p.get());
  out.insert(out.end(), external.begin(), external.end());
  return out;
}

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = u(rng);
  return t;
}

Tensor random_away_from_zero(Rng& rng, std::size_t rows, std::size_t cols, double margin) {
  std::uniform_real_distribution<double> u(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) {
    const double m = u(rng);
    v = sign(rng) ? m : -m;
  }
  return t;
}

Var weighted_sum(Var v, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor w = random_tensor(rng, v.value().nrows(), v.value().ncols());
  return sum(mul_const(v, w));
}

namespace {

std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 6) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

using UnaryOp = std::function<Var(Var)>;
using BinaryOp = std::function<Var(Var, Var)>;

GradCaseFactory unary(std::string name, UnaryOp op, bool avoid_zero = false) {
  return {std::move(name), [op = std::move(op), avoid_zero](Rng& rng) {
            auto c = std::make_unique<GradCase>();
            const std::size_t r = dim(rng), k = dim(rng);
            Parameter& a = c->add_param(
                "a", avoid_zero ? random_away_from_zero(rng, r, k) : random_tensor(rng, r, k));
            const std::uint64_t seed = rng();
            c->loss = [&a, op, seed](Graph& g) { return weighted_sum(op(g.param(a)), seed); };
            return c;
          }};
}

GradCaseFactory binary(std::string name, BinaryOp op, bool row_broadcast = false) {
  return {std::move(name), [op = std::move(op), row_broadcast](Rng& rng) {
            auto c = std::make_unique<GradCase>();
            const std::size_t r = dim(rng), k = dim(rng);
            Parameter& a = c->add_param("a", random_tensor(rng, r, k));
            Parameter& b = c->add_param("b", random_tensor(rng, row_broadcast ? 1 : r, k));
            const std::uint64_t seed = rng();
            c->loss = [&a, &b, op, seed](Graph& g) {
              return weighted_sum(op(g.param(a), g.param(b)), seed);
            };
            return c;
          }};
}

std::unique_ptr<GradCase> matmul_case(Rng& rng) {
  auto c = std::make_unique<GradCase>();
  const std::size_t r = dim(rng), k = dim(rng), n = dim(rng);
  Parameter& a = c->add_param("a", random_tensor(rng, r, k));
  Parameter& b = c->add_param("b", random_tensor(rng, k, n));
  const std::uint64_t seed = rng();
  c->loss = [&a, &b, seed](Graph& g) {
    return weighted_sum(matmul(g.param(a), g.param(b)), seed);
  };
  return c;
}

std::unique_ptr<GradCase> indexed_case(Rng& rng, int which) {
  auto c = std::make_unique<GradCase>();
  const std::size_t r = dim(rng), k = dim(rng);
  Parameter& a = c->add_param("a", random_tensor(rng, r, k));
  // which: 0 gather_rows, 1 pick, 2 gather_flat.
  const std::size_t n = which == 1 ? r : dim(rng, 1, 8);
  const std::size_t hi = which == 0 ? r : which == 1 ? k : r * k;
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = std::uniform_int_distribution<std::size_t>(0, hi - 1)(rng);
  const std::uint64_t seed = rng();
  c->loss = [&a, idx, seed, which](Graph& g) {
    Var x = g.param(a);
    Var y = which == 0 ? gather_rows(x, idx) : which == 1 ? pick(x, idx) : gather_flat(x, idx);
    return weighted_sum(y, seed);
  };
  return c;
}

// Two-layer ReLU network on a fixed input. Redraws until no hidden
// pre-activation sits within 1e-3 of the kink.
std::unique_ptr<GradCase> mlp_case(Rng& rng) {
  for (;;) {
    auto c = std::make_unique<GradCase>();
    const std::size_t batch = dim(rng, 2, 5), in = dim(rng, 2, 6), hidden = dim(rng, 2, 8),
                      out = dim(rng, 1, 4);
    const Tensor x = random_tensor(rng, batch, in);
    Parameter& w1 = c->add_param("w1", random_tensor(rng, in, hidden));
    Parameter& b1 = c->add_param("b1", random_tensor(rng, 1, hidden));
    Parameter& w2 = c->add_param("w2", random_tensor(rng, hidden, out));
    Parameter& b2 = c->add_param("b2", random_tensor(rng, 1, out));
    Tensor pre = matmul(x, w1.value);
    bool clear = true;
    for (std::size_t i = 0; i < pre.size(); ++i) {
      if (std::abs(pre[i] + b1.value[i % hidden]) < 1e-3) clear = false;
    }
    if (!clear) continue;
    const std::uint64_t seed = rng();
    c->loss = [x, &w1, &b1, &w2, &b2, seed](Graph& g) {
      Var h = relu(add(matmul(g.constant(x), g.param(w1)), g.param(b1)));
      Var y = add(matmul(h, g.param(w2)), g.param(b2));
      return weighted_sum(y, seed);
    };
    return c;
  }
}

}  // namespace

const std::vector<GradCaseFactory>& op_grad_cases() {
  static const std::vector<GradCaseFactory> cases = [] {
    std::vector<GradCaseFactory> v;
    v.push_back({"matmul", matmul_case});
    v.push_back(binary("add", [](Var a, Var b) { return add(a, b); }));
    v.push_back(binary("add_row_broadcast", [](Var a, Var b) { return add(a, b); }, true));
    v.push_back(binary("sub", [](Var a, Var b) { return sub(a, b); }));
    v.push_back(binary("sub_row_broadcast", [](Var a, Var b) { return sub(a, b); }, true));
    v.push_back(binary("mul", [](Var a, Var b) { return mul(a, b); }));
    v.push_back(unary("scale", [](Var a) { return scale(a, -1.7); }));
    v.push_back(unary("add_scalar", [](Var a) { return add_scalar(a, 0.3); }));
    v.push_back(unary("mul_const", [](Var a) {
      Tensor c(a.shape(), 0.0);
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 + 0.25 * static_cast<double>(i % 5);
      return mul_const(a, c);
    }));
    v.push_back(unary("relu", [](Var a) { return relu(a); }, true));
    v.push_back(unary("square", [](Var a) { return square(a); }));
    v.push_back(unary("log_softmax_axis1", [](Var a) { return log_softmax(a, 1); }));
    v.push_back(unary("log_softmax_axis0", [](Var a) { return log_softmax(a, 0); }));
    v.push_back(unary("logsumexp_axis1", [](Var a) { return logsumexp(a, 1); }));
    v.push_back(unary("logsumexp_axis0", [](Var a) { return logsumexp(a, 0); }));
    v.push_back(unary("mean", [](Var a) { return mean(a); }));
    v.push_back(unary("sum", [](Var a) { return sum(a); }));
    v.push_back(unary("sum_rows", [](Var a) { return sum_rows(a); }));
    v.push_back(binary("cosine_similarity", [](Var a, Var b) { return cosine_similarity(a, b); }));
    v.push_back(unary("normalize_rows", [](Var a) { return normalize_rows(a); }));
    v.push_back(unary("l1_norm", [](Var a) { return l1_norm(a); }, true));
    v.push_back(unary("transpose", [](Var a) { return transpose(a); }));
    v.push_back({"gather_rows", [](Rng& rng) { return indexed_case(rng, 0); }});
    v.push_back({"pick", [](Rng& rng) { return indexed_case(rng, 1); }});
    v.push_back({"gather_flat", [](Rng& rng) { return indexed_case(rng, 2); }});
    v.push_back({"mlp", mlp_case});
    return v;
  }();
  return cases;
}

}  // namespace gsf
