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
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "gsf/agent.h"
#include "gsf/error.h"

namespace gsf {
namespace {

AgentConfig tiny_config() {
  AgentConfig c;
  c.encoder_hidden = {32};
  c.latent_dim = 16;
  c.projection_hidden = {16};
  c.batch_size = 64;
  c.epochs = 2;
  c.steps_per_epoch = 10;
  c.optimizer = {OptimizerKind::kAdam, 1e-3};
  return c;
}

const OfflineDataset& small_dataset() {
  static const OfflineDataset ds = [] {
    const Family f = generate_family(11, 3, 2);
    const TabularQ q = train_behavior_policy(f.mdp, {}, 11);
    return collect(f, q, {3000, 0.1, 0.0}, 11);
  }();
  return ds;
}

GvfValueTable distance_values(const OfflineDataset& ds) {
  GvfValueTable t;
  t.num_cells = ds.family.mdp.num_cells();
  const auto dist = distances_to_goal(ds.family.mdp);
  for (const auto& l : ds.family.train) {
    t.level_ids.push_back(l.level_id);
    for (std::size_t c = 0; c < t.num_cells; ++c) t.values.push_back(std::pow(0.99, dist[c]));
  }
  return t;
}

Tensor random_obs(Rng& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n01;
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = n01(rng);
  return t;
}

QBatch random_batch(Rng& rng, const AgentParams& p, std::size_t B) {
  QBatch b;
  b.obs = random_obs(rng, B, p.obs_dim);
  b.next_obs = random_obs(rng, B, p.obs_dim);
  b.mu = Tensor::matrix(B, p.num_actions);
  std::uniform_int_distribution<std::size_t> act(0, p.num_actions - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t r = 0; r < B; ++r) {
    b.actions.push_back(act(rng));
    b.rewards.push_back(u(rng));
    b.not_done.push_back(u(rng) < 0.7 ? 1.0 : 0.0);
    double s = 0.0;
    for (std::size_t a = 0; a < p.num_actions; ++a) s += b.mu(r, a) = u(rng);
    for (std::size_t a = 0; a < p.num_actions; ++a) b.mu(r, a) /= s;
  }
  return b;
}

std::vector<Tensor> grads_of(AgentParams& p, const std::function<Var(Graph&)>& f) {
  zero_grads(p.all_parameters());
  Graph g;
  g.backward(f(g));
  std::vector<Tensor> out;
  for (Parameter* q : p.q_parameters()) out.push_back(q->grad);
  return out;
}

TEST(Nce, ZeroClassifierGivesLogK) {
  Rng rng(1);
  AgentConfig cfg = tiny_config();
  AgentParams p(10, 4, cfg, rng);
  p.W.value.fill(0.0);
  Graph g;
  const std::vector<int> labels{1, 3, 7, 7, 2};
  Var l = loss_nce(g, p, p.encode(g, g.constant(random_obs(rng, 5, 10))), labels, 0.5);
  EXPECT_NEAR(l.value().item(), std::log(7.0), 1e-10);
}

TEST(Nce, RejectsOutOfRangeLabels) {
  Rng rng(1);
  AgentParams p(10, 4, tiny_config(), rng);
  Graph g;
  Var z = p.encode(g, g.constant(random_obs(rng, 2, 10)));
  EXPECT_THROW(loss_nce(g, p, z, std::vector<int>{1, 8}, 0.5), ContractError);
  EXPECT_THROW(loss_nce(g, p, z, std::vector<int>{0, 1}, 0.5), ContractError);
}

TEST(Nce, ScaledSeparableLogitsDriveLossToZero) {
  Rng rng(2);
  AgentParams p(10, 4, tiny_config(), rng);
  const Tensor obs = random_obs(rng, 20, 10);
  const Tensor h = matmul(p.projection.predict(p.encoder.predict(obs)), p.W.value);
  std::vector<int> labels;
  for (std::size_t r = 0; r < h.nrows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < h.ncols(); ++c) best = h(r, c) > h(r, best) ? c : best;
    labels.push_back(static_cast<int>(best) + 1);
  }
  double prev = 1e300;
  for (double s : {1.0, 1e2, 1e4, 1e6, 1e8}) {
    AgentParams q = p;
    for (double& v : q.W.value.data()) v *= s;
    Graph g;
    const double l = loss_nce(g, q, q.encode(g, g.constant(obs)), labels, 0.5).value().item();
    EXPECT_LE(l, prev);
    prev = l;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Nce, LabelPermutationEquivariance) {
  Rng rng(3);
  AgentParams p(10, 4, tiny_config(), rng);
  const Tensor obs = random_obs(rng, 12, 10);
  std::vector<int> labels(12);
  for (std::size_t i = 0; i < 12; ++i) labels[i] = static_cast<int>(i % 7) + 1;
  Graph g1;
  const double base = loss_nce(g1, p, p.encode(g1, g1.constant(obs)), labels, 0.5).value().item();
  std::vector<int> perm{3, 6, 0, 2, 5, 1, 4};  // old class c -> new class perm[c]
  AgentParams q = p;
  for (std::size_t r = 0; r < q.W.value.nrows(); ++r) {
    for (std::size_t c = 0; c < 7; ++c) q.W.value(r, perm[c]) = p.W.value(r, c);
  }
  std::vector<int> relabeled;
  for (int l : labels) relabeled.push_back(perm[l - 1] + 1);
  Graph g2;
  const double moved =
      loss_nce(g2, q, q.encode(g2, g2.constant(obs)), relabeled, 0.5).value().item();
  EXPECT_NEAR(moved, base, 1e-12);
}

TEST(Nce, StrictlyDecreasesOnSeparableLabels) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    AgentConfig cfg = tiny_config();
    AgentParams p(8, 4, cfg, rng);
    const Tensor obs = random_obs(rng, 64, 8);
    const Tensor dir = random_obs(rng, 8, 7);
    const Tensor scores = matmul(obs, dir);
    std::vector<int> labels;
    for (std::size_t r = 0; r < 64; ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < 7; ++c) best = scores(r, c) > scores(r, best) ? c : best;
      labels.push_back(static_cast<int>(best) + 1);
    }
    Optimizer opt(p.nce_parameters(), {OptimizerKind::kSgd, 0.05});
    double prev = 1e300;
    for (int step = 0; step < 100; ++step) {
      Graph g;
      opt.zero_grad();
      Var l = loss_nce(g, p, p.encode(g, g.constant(obs)), labels, 0.5);
      ASSERT_LT(l.value().item(), prev) << "seed " << seed << " step " << step;
      prev = l.value().item();
      g.backward(l);
      opt.step();
    }
  }
}

TEST(Cql, ZeroLambdaMatchesFittedQ) {
  Rng rng(4);
  AgentParams p(9, 4, tiny_config(), rng);
  for (int trial = 0; trial < 5; ++trial) {
    const QBatch b = random_batch(rng, p, 16);
    const auto a = grads_of(p, [&](Graph& g) { return loss_cql(g, p, b, 0.0, 0.99); });
    const auto f = grads_of(p, [&](Graph& g) { return loss_fitted_q(g, p, b, 0.99); });
    for (std::size_t k = 0; k < a.size(); ++k) {
      for (std::size_t i = 0; i < a[k].size(); ++i) EXPECT_EQ(a[k][i], f[k][i]);
    }
    // theta_a gradient in closed form: (2/B) sum_b z_b (Q(o_b, a_b) - y_b) e_{a_b}^T.
    const Tensor z = p.encoder.predict(b.obs);
    const Tensor q = matmul(z, p.theta_a.value);
    const Tensor y = td_targets(p, b, 0.99);
    Tensor want = Tensor::matrix(z.ncols(), 4);
    for (std::size_t r = 0; r < 16; ++r) {
      const double resid = q(r, b.actions[r]) - y[r];
      for (std::size_t d = 0; d < z.ncols(); ++d) want(d, b.actions[r]) += 2.0 / 16.0 * z(r, d) * resid;
    }
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(a.back()[i], want[i], 1e-12);
  }
}

TEST(Cql, TargetsBootstrapZeroAtTerminals) {
  Rng rng(5);
  AgentParams p(9, 4, tiny_config(), rng);
  QBatch b = random_batch(rng, p, 8);
  const Tensor qn = p.q_values(b.next_obs, true);
  const Tensor y = td_targets(p, b, 0.9);
  for (std::size_t r = 0; r < 8; ++r) {
    double best = qn(r, 0);
    for (std::size_t c = 1; c < 4; ++c) best = std::max(best, qn(r, c));
    EXPECT_DOUBLE_EQ(y[r], b.rewards[r] + (b.not_done[r] > 0 ? 0.9 * best : 0.0));
  }
}

TEST(Cql, RegularizerIsNonNegativeAndVanishesForOneAction) {
  Rng rng(6);
  AgentParams p(9, 4, tiny_config(), rng);
  for (int trial = 0; trial < 20; ++trial) {
    for (double v : cql_regularizer(p, random_batch(rng, p, 8))) EXPECT_GE(v, 0.0);
  }
  AgentParams one(9, 1, tiny_config(), rng);
  const QBatch b = random_batch(rng, one, 8);
  for (double v : cql_regularizer(one, b)) EXPECT_NEAR(v, 0.0, 1e-12);
  Graph g1, g2;
  EXPECT_NEAR(loss_cql(g1, one, b, 1.0, 0.99).value().item(),
              loss_fitted_q(g2, one, b, 0.99).value().item(), 1e-12);
}

TEST(Cql, RejectsBadBatches) {
  Rng rng(6);
  AgentParams p(9, 4, tiny_config(), rng);
  QBatch b = random_batch(rng, p, 4);
  b.actions[0] = 9;
  Graph g;
  EXPECT_THROW(loss_cql(g, p, b, 1.0, 0.99), ContractError);
  QBatch e;
  EXPECT_THROW(loss_cql(g, p, e, 1.0, 0.99), ContractError);
}

TEST(Pairwise, IdenticalEmbeddingsGiveCountRatio) {
  Rng rng(7);
  AgentParams p(6, 4, tiny_config(), rng);
  Tensor obs = Tensor::matrix(6, 6);
  const Tensor row = random_obs(rng, 1, 6);
  for (std::size_t r = 0; r < 6; ++r) std::copy_n(row.data().begin(), 6, obs.data().begin() + static_cast<long>(r * 6));
  const std::vector<int> labels{1, 1, 2, 2, 2, 3};
  Graph g;
  PairwiseStats st;
  auto l = loss_pairwise_infonce(g, p, p.encode(g, g.constant(obs)), labels, 0.5, &st);
  ASSERT_TRUE(l.has_value());
  // class 1: 2 positive, 8 negative pairs; class 2: 6 and 9; class 3 skipped.
  EXPECT_NEAR(l->value().item(), 0.5 * (std::log(8.0 / 2.0) + std::log(9.0 / 6.0)), 1e-12);
  EXPECT_EQ(st.classes_used, 2u);
  EXPECT_EQ(st.classes_skipped, 1u);
}

TEST(Pairwise, HighTemperatureLimit) {
  Rng rng(8);
  AgentParams p(6, 4, tiny_config(), rng);
  const std::vector<int> labels{1, 1, 2, 2, 2, 3};
  Graph g;
  auto l = loss_pairwise_infonce(g, p, p.encode(g, g.constant(random_obs(rng, 6, 6))), labels, 1e6);
  ASSERT_TRUE(l.has_value());
  EXPECT_NEAR(l->value().item(), 0.5 * (std::log(4.0) + std::log(1.5)), 1e-5);
}

TEST(Pairwise, NoPositivePairsIsSkipped) {
  Rng rng(9);
  AgentParams p(6, 4, tiny_config(), rng);
  Graph g;
  PairwiseStats st;
  auto l = loss_pairwise_infonce(g, p, p.encode(g, g.constant(random_obs(rng, 3, 6))),
                                 std::vector<int>{1, 2, 3}, 0.5, &st);
  EXPECT_FALSE(l.has_value());
  EXPECT_EQ(st.classes_skipped, 3u);
}

TEST(Losses, GradientCheck) {
  Rng rng(10);
  for (const auto& f : loss_gradient_cases()) {
    for (int i = 0; i < 10; ++i) {
      auto c = f.make(rng);
      const auto r = gradient_check(c->loss, c->params());
      EXPECT_TRUE(r.passed) << f.name << " instance " << i << " max rel " << r.max_rel_error;
    }
  }
}

TEST(Agent, QIsLinearInLatentAndIgnoresContrastiveHead) {
  Rng rng(11);
  AgentParams p(9, 4, tiny_config(), rng);
  const Tensor obs = random_obs(rng, 5, 9);
  const Tensor q = p.q_values(obs);
  EXPECT_EQ(q, matmul(p.encoder.predict(obs), p.theta_a.value));
  for (Parameter* x : p.projection.parameters()) x->value.fill(3.0);
  p.W.value.fill(-2.0);
  EXPECT_EQ(p.q_values(obs), q);
}

TEST(Agent, TargetGapShrinksGeometrically) {
  Rng rng(12);
  AgentParams p(9, 4, tiny_config(), rng);
  for (Parameter* t : p.ema_targets()) {
    for (double& v : t->value.data()) v += 1.0;
  }
  auto gap = [&] {
    double s = 0.0;
    const auto src = p.ema_sources(), tgt = p.ema_targets();
    for (std::size_t k = 0; k < src.size(); ++k) {
      for (std::size_t i = 0; i < src[k]->value.size(); ++i) {
        s += std::pow(tgt[k]->value[i] - src[k]->value[i], 2);
      }
    }
    return std::sqrt(s);
  };
  const double g0 = gap();
  for (int n = 0; n < 50; ++n) ema_update(p.ema_targets(), p.ema_sources(), 0.05);
  EXPECT_NEAR(gap(), g0 * std::pow(0.95, 50), 1e-9 * g0);
}

TEST(Agent, CheckpointRoundTrip) {
  Rng rng(13);
  AgentParams p(9, 4, tiny_config(), rng);
  const AgentParams back = AgentParams::from_checkpoint(Checkpoint::deserialize(p.to_checkpoint().serialize()));
  const Tensor obs = random_obs(rng, 3, 9);
  EXPECT_EQ(back.q_values(obs), p.q_values(obs));
  EXPECT_EQ(back.q_values(obs, true), p.q_values(obs, true));
  EXPECT_EQ(back.W.value, p.W.value);
}

TEST(Bc, ZeroHeadGivesLogActions) {
  Rng rng(14);
  AgentParams p(9, 4, tiny_config(), rng);
  p.theta_a.value.fill(0.0);
  Graph g;
  const std::vector<std::size_t> a{0, 1, 3};
  EXPECT_NEAR(loss_bc(g, p, random_obs(rng, 3, 9), a).value().item(), std::log(4.0), 1e-12);
}

double bc_accuracy(const OfflineDataset& ds, const AgentParams& p) {
  std::size_t hit = 0;
  for (const auto& tr : ds.transitions) {
    Tensor obs = Tensor::matrix(1, ds.obs_dim());
    const auto o = ds.obs(tr.level_id, tr.state);
    std::copy(o.begin(), o.end(), obs.data().begin());
    hit += p.act(obs)[0] == tr.action;
  }
  return static_cast<double>(hit) / static_cast<double>(ds.transitions.size());
}

TEST(Bc, OverfitsGreedyData) {
  const Family f = generate_family(11, 2, 1);
  const TabularQ q = train_behavior_policy(f.mdp, {}, 11);
  const OfflineDataset ds = collect(f, q, {1000, 0.0, 0.0}, 11);
  AgentConfig cfg = tiny_config();
  cfg.pad = 0;
  cfg.encoder_hidden = {128};
  cfg.latent_dim = 64;
  cfg.epochs = 60;
  cfg.steps_per_epoch = 0;
  cfg.optimizer.learning_rate = 3e-3;
  const AgentRun run = train_bc(ds, cfg, 1);
  EXPECT_GE(bc_accuracy(ds, run.params), 0.99);
}

TEST(Bc, RandomActionsStayNearChance) {
  const Family f = generate_family(11, 2, 1);
  const TabularQ q = train_behavior_policy(f.mdp, {}, 11);
  const OfflineDataset ds = collect(f, q, {4000, 1.0, 1.0}, 11);
  AgentConfig cfg = tiny_config();
  cfg.pad = 0;
  cfg.epochs = 3;
  cfg.steps_per_epoch = 0;
  const AgentRun run = train_bc(ds, cfg, 1);
  EXPECT_NEAR(bc_accuracy(ds, run.params), 0.25, 0.06);
}

TEST(Training, SameSeedSameParameters) {
  const OfflineDataset& ds = small_dataset();
  const GvfValueTable v = distance_values(ds);
  const AgentRun a = train_gsf(ds, &v, tiny_config(), 3);
  const AgentRun b = train_gsf(ds, &v, tiny_config(), 3);
  EXPECT_EQ(a.params.to_checkpoint().serialize(), b.params.to_checkpoint().serialize());
  const AgentRun c = train_gsf(ds, &v, tiny_config(), 4);
  EXPECT_NE(a.params.to_checkpoint().serialize(), c.params.to_checkpoint().serialize());
}

TEST(Training, CqlBaselineIsGsfWithoutContrastiveStep) {
  const OfflineDataset& ds = small_dataset();
  const GvfValueTable v = distance_values(ds);
  const AgentRun cql = train_cql(ds, tiny_config(), 3);
  const AgentRun off = train_gsf(ds, &v, tiny_config(), 3, {}, false);
  const AgentRun gsf = train_gsf(ds, &v, tiny_config(), 3);
  EXPECT_EQ(cql.params.to_checkpoint().serialize(), off.params.to_checkpoint().serialize());
  EXPECT_NE(cql.params.to_checkpoint().serialize(), gsf.params.to_checkpoint().serialize());
  EXPECT_TRUE(std::isnan(cql.metrics[0].nce_loss));
  EXPECT_FALSE(std::isnan(gsf.metrics[0].nce_loss));
}

TEST(Training, ConstantGvfGivesOneClass) {
  const Family f = generate_family(11, 1, 1);
  const TabularQ q = train_behavior_policy(f.mdp, {}, 11);
  const OfflineDataset ds = collect(f, q, {2000, 0.1, 0.0}, 11);
  GvfValueTable v;
  v.num_cells = f.mdp.num_cells();
  v.level_ids = {f.train[0].level_id};
  v.values.assign(v.num_cells, 0.5);
  AgentConfig cfg = tiny_config();
  cfg.epochs = 4;
  const AgentRun run = train_gsf(ds, &v, cfg, 5);
  EXPECT_EQ(run.metrics.front().label_entropy, 0.0);
  EXPECT_LT(run.metrics.back().nce_loss, run.metrics.front().nce_loss);
}

TEST(Training, SmallBatchesLeaveLevelsUnlabeled) {
  const OfflineDataset& ds = small_dataset();
  const GvfValueTable v = distance_values(ds);
  AgentConfig cfg = tiny_config();
  cfg.batch_size = 8;
  const AgentRun run = train_gsf(ds, &v, cfg, 3);
  EXPECT_GT(run.metrics[0].unlabeled_samples, 0u);
  cfg.label_mode = LabelMode::kDataset;
  const AgentRun full = train_gsf(ds, &v, cfg, 3);
  EXPECT_EQ(full.metrics[0].unlabeled_samples, 0u);
  EXPECT_EQ(full.metrics[0].label_churn, 0.0);
}

TEST(Training, PairwiseVariantRuns) {
  const OfflineDataset& ds = small_dataset();
  const GvfValueTable v = distance_values(ds);
  AgentConfig cfg = tiny_config();
  cfg.loss = ContrastiveLoss::kPairwise;
  const AgentRun run = train_gsf(ds, &v, cfg, 3);
  EXPECT_TRUE(std::isfinite(run.metrics.back().nce_loss));
}

TEST(Training, EvalCallbackAndCsv) {
  const OfflineDataset& ds = small_dataset();
  std::size_t calls = 0;
  const AgentRun run = train_cql(ds, tiny_config(), 3, [&](const AgentParams&, std::size_t e) {
    ++calls;
    return std::pair<double, double>{0.5 * static_cast<double>(e), 0.25};
  });
  EXPECT_EQ(calls, 2u);
  const auto path = std::filesystem::temp_directory_path() / "gsf_agent_metrics.csv";
  write_metrics_csv(path.string(), run.metrics);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header, "epoch,cql_loss,nce_loss,eval_return_train,eval_return_test");
  EXPECT_TRUE(line.starts_with("1,")) << line;
  EXPECT_TRUE(line.ends_with(",nan,0.5,0.25")) << line;
}

TEST(Config, Validation) {
  AgentConfig c = tiny_config();
  c.tau = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = tiny_config();
  c.lambda = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_THROW(train_gsf(small_dataset(), nullptr, tiny_config(), 1), ContractError);
  EXPECT_THROW(parse_contrastive_loss("x"), ConfigError);
  EXPECT_EQ(parse_label_mode("dataset"), LabelMode::kDataset);
}

}  // namespace
}  // namespace gsf
