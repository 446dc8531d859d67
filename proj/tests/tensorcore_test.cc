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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>

#include "gsf/autodiff.h"
#include "gsf/checkpoint.h"
#include "gsf/error.h"
#include "gsf/gradcheck.h"
#include "gsf/nn.h"
#include "gsf/optim.h"

namespace gsf {
namespace {

TEST(Ops, LogSumExpOfZerosIsLn2) {
  Graph g;
  Var x = g.constant(Tensor::rows({{0.0, 0.0}}));
  EXPECT_NEAR(logsumexp(x, 1).value().item(), std::numbers::ln2, 1e-15);
}

TEST(Ops, UniformLogSoftmax) {
  Graph g;
  Var x = g.constant(Tensor::matrix(1, 7, 3.25));
  const Tensor y = log_softmax(x, 1).value();
  for (double v : y.data()) EXPECT_NEAR(v, -std::log(7.0), 1e-14);
}

TEST(Ops, CosineOfVectorWithItself) {
  Graph g;
  Var v = g.constant(Tensor::rows({{0.3, -2.0, 5.0}, {1e-3, 0.0, 0.0}}));
  const Tensor c = cosine_similarity(v, v).value();
  EXPECT_NEAR(c[0], 1.0, 1e-14);
  EXPECT_NEAR(c[1], 1.0, 1e-14);
}

TEST(Ops, LogSoftmaxRowsNormalize) {
  Rng rng(11);
  for (int axis : {0, 1}) {
    Graph g;
    Tensor t = random_tensor(rng, 5, 9, -30.0, 30.0);
    const Tensor y = log_softmax(g.constant(t), axis).value();
    const std::size_t outer = axis == 1 ? 5 : 9, inner = axis == 1 ? 9 : 5;
    for (std::size_t o = 0; o < outer; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < inner; ++i) {
        const double v = axis == 1 ? y(o, i) : y(i, o);
        EXPECT_LE(v, 0.0);
        s += std::exp(v);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Ops, LogSumExpBounds) {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    Graph g;
    Tensor t = random_tensor(rng, 1, 1 + rep % 10, -500.0, 500.0);
    const double l = logsumexp(g.constant(t), 1).value().item();
    double mx = t[0];
    for (double v : t.data()) mx = std::max(mx, v);
    EXPECT_GE(l, mx);
    EXPECT_LE(l, mx + std::log(static_cast<double>(t.size())) + 1e-12);
  }
}

TEST(Ops, MatmulMatchesLoops) {
  Rng rng(3);
  const Tensor a = random_tensor(rng, 4, 7), b = random_tensor(rng, 7, 3);
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 7; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-13);
    }
  }
  const Tensor ct = matmul(b, a, true, true);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(ct(i, j), c(j, i), 1e-13);
  }
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  Graph g;
  Var a = g.constant(Tensor::matrix(2, 3));
  Var b = g.constant(Tensor::matrix(4, 5));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
  EXPECT_THROW(add(a, b), ShapeError);
}

TEST(Ops, NonFiniteForwardIsRejected) {
  Graph g;
  Var a = g.constant(Tensor::rows({{1e200}}));
  EXPECT_THROW(square(square(a)), NumericError);
}

TEST(Backward, MeanOfSquares) {
  Parameter x("x", Tensor::rows({{1.0, 2.0}}));
  Graph g;
  g.backward(mean(square(g.param(x))));
  EXPECT_DOUBLE_EQ(x.grad[0], 1.0);
  EXPECT_DOUBLE_EQ(x.grad[1], 2.0);
}

TEST(Backward, LogSumExpGradientIsSoftmax) {
  Parameter x("x", Tensor::rows({{0.5, -1.0, 2.0, 0.0}}));
  Graph g;
  g.backward(sum(logsumexp(g.param(x), 1)));
  double z = 0.0;
  for (double v : x.value.data()) z += std::exp(v);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(x.grad[i], std::exp(x.value[i]) / z, 1e-15);
}

TEST(Backward, RequiresScalarLoss) {
  Parameter x("x", Tensor::matrix(2, 2, 1.0));
  Graph g;
  EXPECT_THROW(g.backward(g.param(x)), ShapeError);
}

TEST(Backward, AccumulatesAcrossGraphs) {
  Parameter x("x", Tensor::rows({{3.0}}));
  for (int i = 0; i < 2; ++i) {
    Graph g;
    g.backward(sum(scale(g.param(x), 2.0)));
  }
  EXPECT_DOUBLE_EQ(x.grad[0], 4.0);
}

TEST(GradientCheck, LinearFunctionIsNearlyExact) {
  Parameter w("w", Tensor::rows({{0.3, -1.2, 2.5}}));
  const Tensor c = Tensor::rows({{1.5, 0.25, -4.0}});
  const auto report = gradient_check(
      [&](Graph& g) { return add_scalar(sum(mul_const(g.param(w), c)), 1.0); },
      std::vector<Parameter*>{&w}, 1e-5, 1e-6);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradientCheck, RandomMlp) {
  Rng rng(2024);
  Mlp net("net", {5, 8, 3}, rng);
  const Tensor x = random_tensor(rng, 6, 5);
  const auto params = net.parameters();
  const auto report = gradient_check(
      [&](Graph& g) { return mean(square(net.forward(g, g.constant(x)))); }, params);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  EXPECT_LE(report.max_rel_error, 1e-4);
  EXPECT_EQ(report.params.size(), params.size());
}

TEST(GradientCheck, EveryRegisteredOp) {
  Rng rng(77);
  for (const auto& factory : op_grad_cases()) {
    for (int rep = 0; rep < 10; ++rep) {
      auto c = factory.make(rng);
      const auto report = gradient_check(c->loss, c->params());
      EXPECT_TRUE(report.passed) << factory.name << " rep " << rep << " err "
                                 << report.max_rel_error;
    }
  }
}

// Square op whose backward is off by 10%.
Var broken_square(Var a) {
  Graph& g = *a.graph();
  Tensor y = a.value();
  for (double& v : y.data()) v *= v;
  const int ia = a.id();
  return g.make_node(
      std::move(y), {ia},
      [ia](Graph& gr, int self) {
        const Tensor& gy = gr.grad(self);
        const Tensor& av = gr.value(ia);
        Tensor& ga = gr.grad(ia);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.2 * av[i] * gy[i];
      },
      "broken_square");
}

TEST(GradientCheck, CorruptedGradientFails) {
  Parameter x("x", Tensor::rows({{0.7, -1.3}}));
  const auto report = gradient_check([&](Graph& g) { return sum(broken_square(g.param(x))); },
                                     std::vector<Parameter*>{&x});
  EXPECT_FALSE(report.passed);
  EXPECT_NEAR(report.max_rel_error, 0.2 / 2.2, 1e-6);
}

TEST(Optim, AdamFirstStepMovesByLearningRate) {
  Parameter p("p", Tensor::rows({{1.0, -2.0, 0.5}}));
  Optimizer opt({&p}, {OptimizerKind::kAdam, 0.01});
  p.grad = Tensor::rows({{0.3, -4.0, 1e-3}});
  opt.step();
  EXPECT_NEAR(p.value[0], 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value[1], -2.0 + 0.01 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value[2], 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-15);
}

TEST(Optim, AdamSecondStepMatchesRecurrence) {
  Parameter p("p", Tensor::rows({{0.0}}));
  Optimizer opt({&p}, {OptimizerKind::kAdam, 0.1});
  p.grad[0] = 1.0;
  opt.step();
  p.grad[0] = -3.0;
  opt.step();
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -3.0;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 9.0;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p.value[0], -0.1 / (1.0 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-14);
}

TEST(Optim, SgdStep) {
  Parameter p("p", Tensor::rows({{1.0, 2.0}}));
  Optimizer opt({&p}, {OptimizerKind::kSgd, 0.5});
  p.grad = Tensor::rows({{2.0, -1.0}});
  opt.step();
  EXPECT_DOUBLE_EQ(p.value[0], 0.0);
  EXPECT_DOUBLE_EQ(p.value[1], 2.5);
}

TEST(Nn, EmaUpdateIsExact) {
  Parameter online("w", Tensor::rows({{1.0, 4.0}}));
  Parameter target("w", Tensor::rows({{3.0, 0.0}}));
  std::vector<Parameter*> t{&target}, o{&online};
  ema_update(t, o, 0.25);
  EXPECT_DOUBLE_EQ(target.value[0], 0.25 * 1.0 + 0.75 * 3.0);
  EXPECT_DOUBLE_EQ(target.value[1], 1.0);
}

TEST(Nn, PredictMatchesGraphForward) {
  Rng rng(9);
  Mlp net("m", {4, 6, 6, 2}, rng);
  const Tensor x = random_tensor(rng, 3, 4);
  Graph g;
  EXPECT_EQ(net.forward(g, g.constant(x)).value(), net.predict(x));
}

TEST(Checkpoint, RoundTrip) {
  Checkpoint c;
  c.meta = R"({"kind":"test"})";
  c.add("a", Tensor::rows({{1.0, 2.0}, {3.0, 4.5}}));
  c.add("b", Tensor({2, 1, 3}, 0.125));
  const auto path = std::filesystem::temp_directory_path() / "gsf_ckpt_test.bin";
  save_checkpoint(path.string(), c);
  const Checkpoint d = load_checkpoint(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(d.meta, c.meta);
  EXPECT_EQ(d.get("a"), c.get("a"));
  EXPECT_EQ(d.get("b"), c.get("b"));
  EXPECT_EQ(d.serialize(), c.serialize());
}

TEST(Checkpoint, RejectsBadInput) {
  EXPECT_THROW(Checkpoint::deserialize("NOTACKPT"), IoError);
  Checkpoint c;
  c.add("a", Tensor::matrix(2, 2));
  std::string bytes = c.serialize();
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(Checkpoint::deserialize(bytes), IoError);
  Parameter p("a", Tensor::matrix(3, 2));
  EXPECT_THROW(c.restore(std::vector<Parameter*>{&p}), ShapeError);
}

}  // namespace
}  // namespace gsf
