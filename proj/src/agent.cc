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

#include "gsf/agent.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/fmt/fmt.h>

#include "gsf/augment.h"
#include "gsf/error.h"
#include "gsf/log.h"
#include "gsf/quantile.h"
#include "gsf/random.h"

namespace gsf {

ContrastiveLoss parse_contrastive_loss(const std::string& s) {
  if (s == "cce") return ContrastiveLoss::kCce;
  if (s == "pairwise") return ContrastiveLoss::kPairwise;
  throw ConfigError("", "unknown contrastive loss '" + s + "' (expected cce or pairwise)");
}

std::string to_string(ContrastiveLoss loss) {
  return loss == ContrastiveLoss::kCce ? "cce" : "pairwise";
}

LabelMode parse_label_mode(const std::string& s) {
  if (s == "batch") return LabelMode::kBatch;
  if (s == "dataset") return LabelMode::kDataset;
  throw ConfigError("", "unknown label mode '" + s + "' (expected batch or dataset)");
}

std::string to_string(LabelMode mode) { return mode == LabelMode::kBatch ? "batch" : "dataset"; }

void validate(const AgentConfig& c) {
  if (c.latent_dim == 0) throw ConfigError("agent.latent_dim", "must be positive");
  if (c.batch_size == 0) throw ConfigError("agent.batch_size", "must be positive");
  if (c.epochs == 0) throw ConfigError("agent.epochs", "must be positive");
  if (c.K < 1) throw ConfigError("agent.K", "must be >= 1");
  if (!(c.tau > 0.0)) throw ConfigError("agent.tau", "must be > 0");
  if (!(c.lambda >= 0.0)) throw ConfigError("agent.lambda", "must be >= 0");
  if (!(c.ema > 0.0 && c.ema <= 1.0)) throw ConfigError("agent.ema", "must be in (0, 1]");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw ConfigError("agent.gamma", "must be in [0, 1)");
  if (!(c.optimizer.learning_rate > 0.0)) {
    throw ConfigError("agent.optimizer.learning_rate", "must be positive");
  }
}

namespace {

Tensor uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = u(rng);
  return t;
}

void rename(Mlp& net, const std::string& prefix) {
  for (Parameter* p : net.parameters()) p->name = prefix + p->name.substr(p->name.find('.'));
}

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden,
                                std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

std::vector<std::size_t> inner(const std::vector<std::size_t>& sizes) {
  return {sizes.begin() + 1, sizes.end() - 1};
}

}  // namespace

AgentParams::AgentParams(std::size_t obs_dim_in, std::size_t num_actions_in,
                         const AgentConfig& config, Rng& rng)
    : obs_dim(obs_dim_in), num_actions(num_actions_in), K(config.K) {
  const std::size_t z = config.latent_dim;
  encoder = Mlp("agent_enc", widths(obs_dim, config.encoder_hidden, z), rng);
  projection = Mlp("agent_proj", widths(z, config.projection_hidden, z), rng);
  theta_a = Parameter("agent.theta_a", uniform_matrix(z, num_actions, rng));
  W = Parameter("agent.W", uniform_matrix(z, K, rng));
  target_encoder = encoder;
  rename(target_encoder, "agent_target_enc");
  target_theta_a = Parameter("agent_target.theta_a", theta_a.value);
}

Var AgentParams::encode(Graph& g, Var obs) { return encoder.forward(g, obs); }

Var AgentParams::q(Graph& g, Var z) { return matmul(z, g.param(theta_a)); }

Var AgentParams::logits(Graph& g, Var z, double tau) {
  return scale(matmul(projection.forward(g, z), g.param(W)), 1.0 / tau);
}

Tensor AgentParams::q_values(const Tensor& obs, bool target) const {
  return target ? matmul(target_encoder.predict(obs), target_theta_a.value)
                : matmul(encoder.predict(obs), theta_a.value);
}

std::vector<std::size_t> AgentParams::act(const Tensor& obs) const {
  const Tensor q = q_values(obs);
  std::vector<std::size_t> a(q.nrows(), 0);
  for (std::size_t r = 0; r < q.nrows(); ++r) {
    for (std::size_t c = 1; c < q.ncols(); ++c) {
      if (q(r, c) > q(r, a[r])) a[r] = c;
    }
  }
  return a;
}

std::vector<Parameter*> AgentParams::q_parameters() {
  auto v = encoder.parameters();
  v.push_back(&theta_a);
  return v;
}

std::vector<Parameter*> AgentParams::nce_parameters() {
  auto v = projection.parameters();
  const auto e = encoder.parameters();
  v.insert(v.end(), e.begin(), e.end());
  v.push_back(&W);
  return v;
}

std::vector<Parameter*> AgentParams::ema_sources() { return q_parameters(); }

std::vector<Parameter*> AgentParams::ema_targets() {
  auto v = target_encoder.parameters();
  v.push_back(&target_theta_a);
  return v;
}

std::vector<Parameter*> AgentParams::all_parameters() {
  auto v = encoder.parameters();
  for (auto* p : projection.parameters()) v.push_back(p);
  v.push_back(&theta_a);
  v.push_back(&W);
  for (auto* p : ema_targets()) v.push_back(p);
  return v;
}

Checkpoint AgentParams::to_checkpoint() const {
  Checkpoint c;
  c.meta = nlohmann::json{{"kind", "agent"},
                          {"obs_dim", obs_dim},
                          {"num_actions", num_actions},
                          {"K", K},
                          {"encoder", encoder.sizes()},
                          {"projection", projection.sizes()}}
               .dump();
  c.add(const_cast<AgentParams&>(*this).all_parameters());
  return c;
}

AgentParams AgentParams::from_checkpoint(const Checkpoint& ckpt) {
  const auto meta = nlohmann::json::parse(ckpt.meta);
  if (meta.value("kind", "") != "agent") throw IoError("checkpoint is not an agent");
  const auto enc = meta.at("encoder").get<std::vector<std::size_t>>();
  const auto proj = meta.at("projection").get<std::vector<std::size_t>>();
  if (enc.size() < 2 || proj.size() < 2) throw IoError("agent checkpoint has malformed layer sizes");
  AgentConfig cfg;
  cfg.encoder_hidden = inner(enc);
  cfg.latent_dim = enc.back();
  cfg.projection_hidden = inner(proj);
  cfg.K = meta.at("K").get<std::size_t>();
  Rng rng(0);
  AgentParams p(meta.at("obs_dim").get<std::size_t>(), meta.at("num_actions").get<std::size_t>(),
                cfg, rng);
  ckpt.restore(p.all_parameters());
  return p;
}

Tensor td_targets(const AgentParams& p, const QBatch& b, double gamma) {
  const Tensor qn = p.q_values(b.next_obs, true);
  Tensor y = Tensor::matrix(qn.nrows(), 1);
  for (std::size_t r = 0; r < qn.nrows(); ++r) {
    double best = qn(r, 0);
    for (std::size_t c = 1; c < qn.ncols(); ++c) best = std::max(best, qn(r, c));
    y[r] = b.rewards[r] + gamma * b.not_done[r] * best;
  }
  return y;
}

namespace {

void check_batch(const AgentParams& p, const QBatch& b) {
  if (b.obs.empty()) throw ContractError("empty minibatch");
  const std::size_t B = b.obs.nrows();
  if (b.actions.size() != B || b.rewards.size() != B || b.not_done.size() != B ||
      b.next_obs.nrows() != B) {
    throw ShapeError("minibatch fields disagree on batch size " + std::to_string(B));
  }
  for (std::size_t a : b.actions) {
    if (a >= p.num_actions) throw ContractError("action " + std::to_string(a) + " out of range");
  }
}

Var td_term(Graph& g, Var q, const QBatch& b, const Tensor& y) {
  return mean(square(sub(pick(q, b.actions), g.constant(y))));
}

}  // namespace

Var loss_fitted_q(Graph& g, AgentParams& p, const QBatch& b, double gamma) {
  check_batch(p, b);
  const Tensor y = td_targets(p, b, gamma);
  return td_term(g, p.q(g, p.encode(g, g.constant(b.obs))), b, y);
}

Var loss_cql(Graph& g, AgentParams& p, const QBatch& b, double lambda, double gamma) {
  check_batch(p, b);
  if (b.mu.nrows() != b.obs.nrows() || b.mu.ncols() != p.num_actions) {
    throw ShapeError("behavior probabilities " + b.mu.shape_string() + " for " +
                     std::to_string(b.obs.nrows()) + " rows and " +
                     std::to_string(p.num_actions) + " actions");
  }
  const Tensor y = td_targets(p, b, gamma);
  Var q = p.q(g, p.encode(g, g.constant(b.obs)));
  Var td = td_term(g, q, b, y);
  if (lambda == 0.0) return td;
  Var reg = mean(sub(logsumexp(q, 1), sum_rows(mul_const(q, b.mu))));
  return add(td, scale(reg, lambda));
}

std::vector<double> cql_regularizer(const AgentParams& p, const QBatch& b) {
  const Tensor q = p.q_values(b.obs);
  std::vector<double> out(q.nrows());
  for (std::size_t r = 0; r < q.nrows(); ++r) {
    double m = q(r, 0);
    for (std::size_t c = 1; c < q.ncols(); ++c) m = std::max(m, q(r, c));
    double s = 0.0, e = 0.0;
    for (std::size_t c = 0; c < q.ncols(); ++c) {
      s += std::exp(q(r, c) - m);
      e += b.mu(r, c) * q(r, c);
    }
    out[r] = m + std::log(s) - e;
  }
  return out;
}

Var loss_nce(Graph& g, AgentParams& p, Var z, std::span<const int> labels, double tau) {
  if (labels.size() != z.value().nrows()) {
    throw ShapeError("loss_nce: " + std::to_string(labels.size()) + " labels for " +
                     z.value().shape_string() + " embeddings");
  }
  if (labels.empty()) throw ContractError("loss_nce: empty batch");
  std::vector<std::size_t> cls(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || static_cast<std::size_t>(labels[i]) > p.K) {
      throw ContractError("label " + std::to_string(labels[i]) + " outside 1.." +
                          std::to_string(p.K));
    }
    cls[i] = static_cast<std::size_t>(labels[i] - 1);
  }
  return scale(mean(pick(log_softmax(p.logits(g, z, tau), 1), cls)), -1.0);
}

std::optional<Var> loss_pairwise_infonce(Graph& g, AgentParams& p, Var z,
                                         std::span<const int> labels, double tau,
                                         PairwiseStats* stats) {
  const std::size_t B = labels.size();
  if (B != z.value().nrows()) {
    throw ShapeError("loss_pairwise_infonce: " + std::to_string(B) + " labels for " +
                     z.value().shape_string() + " embeddings");
  }
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < B; ++i) members[labels[i]].push_back(i);
  Var e = normalize_rows(p.projection.forward(g, z));
  Var sim = scale(matmul(e, transpose(e)), 1.0 / tau);
  std::optional<Var> total;
  std::size_t used = 0;
  for (const auto& [label, pos] : members) {
    if (pos.size() < 2 || pos.size() == B) {
      if (stats != nullptr) ++stats->classes_skipped;
      continue;
    }
    std::vector<bool> in(B, false);
    for (std::size_t i : pos) in[i] = true;
    std::vector<std::size_t> pp, pn;
    for (std::size_t i : pos) {
      for (std::size_t j = 0; j < B; ++j) {
        if (j == i) continue;
        (in[j] ? pp : pn).push_back(i * B + j);
      }
    }
    Var term = sub(logsumexp(gather_flat(sim, pn), 1), logsumexp(gather_flat(sim, pp), 1));
    total = total ? add(*total, term) : term;
    ++used;
    if (stats != nullptr) ++stats->classes_used;
  }
  if (!total) return std::nullopt;
  return scale(*total, 1.0 / static_cast<double>(used));
}

Var loss_bc(Graph& g, AgentParams& p, const Tensor& obs, std::span<const std::size_t> actions) {
  if (actions.size() != obs.nrows()) throw ShapeError("loss_bc: actions and observations differ");
  return scale(mean(pick(log_softmax(p.q(g, p.encode(g, g.constant(obs))), 1), actions)), -1.0);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Minibatch assembly over the dataset's observation table.
class Batcher {
 public:
  Batcher(const OfflineDataset& ds, const AgentConfig& cfg, std::uint64_t seed)
      : ds_(ds),
        cfg_(cfg),
        order_rng_(make_rng(seed, streams::kAgentBatches)),
        aug_rng_(make_rng(seed, streams::kAugment)),
        shape_{kNumChannels, ds.family.mdp.height, ds.family.mdp.width},
        perm_(ds.transitions.size()) {
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    pos_ = perm_.size();
  }

  std::vector<std::size_t> next_indices() {
    const std::size_t B = cfg_.batch_size;
    if (pos_ + B > perm_.size()) {
      for (std::size_t i = perm_.size() - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> u(0, i);
        std::swap(perm_[i], perm_[u(order_rng_)]);
      }
      pos_ = 0;
    }
    std::vector<std::size_t> idx(perm_.begin() + static_cast<long>(pos_),
                                 perm_.begin() + static_cast<long>(pos_ + B));
    pos_ += B;
    return idx;
  }

  QBatch make(std::span<const std::size_t> idx) {
    const std::size_t B = idx.size(), D = ds_.obs_dim(), A = ds_.family.mdp.action_count;
    QBatch b;
    b.obs = Tensor::matrix(B, D);
    b.next_obs = Tensor::matrix(B, D);
    b.mu = Tensor::matrix(B, A);
    for (std::size_t k = 0; k < B; ++k) {
      const Transition& tr = ds_.transitions[idx[k]];
      random_crop_into(ds_.obs(tr.level_id, tr.state), b.obs.data().subspan(k * D, D), shape_,
                       cfg_.pad, aug_rng_);
      random_crop_into(ds_.obs(tr.level_id, tr.next_state), b.next_obs.data().subspan(k * D, D),
                       shape_, cfg_.pad, aug_rng_);
      b.actions.push_back(tr.action);
      b.rewards.push_back(tr.reward);
      b.not_done.push_back(tr.done ? 0.0 : 1.0);
      for (std::size_t a = 0; a < A; ++a) b.mu(k, a) = behavior_prob(tr, a, A);
    }
    return b;
  }

 private:
  const OfflineDataset& ds_;
  const AgentConfig& cfg_;
  Rng order_rng_;
  Rng aug_rng_;
  std::array<std::size_t, 3> shape_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

Tensor select_rows(const Tensor& t, std::span<const std::size_t> rows) {
  Tensor out = Tensor::matrix(rows.size(), t.ncols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(t.data().begin() + static_cast<long>(rows[i] * t.ncols()), t.ncols(),
                out.data().begin() + static_cast<long>(i * t.ncols()));
  }
  return out;
}

double entropy(const std::vector<std::size_t>& counts) {
  double n = 0.0, h = 0.0;
  for (std::size_t c : counts) n += static_cast<double>(c);
  if (n == 0.0) return 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

std::size_t steps_per_epoch(const OfflineDataset& ds, const AgentConfig& cfg) {
  if (ds.transitions.size() < cfg.batch_size) {
    throw ContractError("dataset has " + std::to_string(ds.transitions.size()) +
                        " transitions, fewer than one batch of " +
                        std::to_string(cfg.batch_size));
  }
  return cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : ds.transitions.size() / cfg.batch_size;
}

void zero_all(AgentParams& p) { zero_grads(p.all_parameters()); }

[[noreturn]] void abort_run(const AgentParams& p, const AgentConfig& cfg, const std::string& where,
                            const Error& e) {
  if (!cfg.abort_checkpoint.empty()) {
    save_checkpoint(cfg.abort_checkpoint, p.to_checkpoint());
    logger().error("training aborted at {}; parameters saved to {}", where, cfg.abort_checkpoint);
  }
  throw NumericError("training aborted at " + where + ": " + e.what());
}

void finish_epoch(EpochMetrics& m, const AgentParams& p, const EvalFn& eval) {
  if (eval) {
    std::tie(m.eval_return_train, m.eval_return_test) = eval(p, m.epoch);
  } else {
    m.eval_return_train = m.eval_return_test = kNaN;
  }
}

}  // namespace

AgentRun train_gsf(const OfflineDataset& ds, const GvfValueTable* values,
                   const AgentConfig& config, std::uint64_t seed, const EvalFn& eval,
                   bool contrastive) {
  validate(config);
  if (contrastive && values == nullptr) {
    throw ContractError("contrastive training needs GVF values for every level");
  }
  ds.check_split();
  StageTimer timer(contrastive ? "train-gsf" : "train-cql");
  const std::size_t N = ds.transitions.size();
  const std::size_t steps = steps_per_epoch(ds, config);
  Rng init = make_rng(seed, streams::kAgentInit);
  AgentRun run{AgentParams(ds.obs_dim(), ds.family.mdp.action_count, config, init), {}};
  AgentParams& p = run.params;
  Optimizer q_opt(p.q_parameters(), config.optimizer);
  Optimizer nce_opt(p.nce_parameters(), config.optimizer);
  const auto sources = p.ema_sources();
  const auto targets = p.ema_targets();

  std::vector<int> level_of(N);
  std::vector<double> g(N, 0.0);
  std::vector<int> dataset_labels;
  if (contrastive) {
    for (std::size_t i = 0; i < N; ++i) {
      level_of[i] = ds.transitions[i].level_id;
      g[i] = values->at(level_of[i], ds.transitions[i].state);
    }
    dataset_labels = assign_labels(level_of, g, config.K).labels;
  }

  Batcher batcher(ds, config, seed);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.bc_loss = kNaN;
    double cql_sum = 0.0, nce_sum = 0.0;
    std::size_t nce_steps = 0, churn = 0, labeled = 0;
    std::vector<std::size_t> hist(config.K + 1, 0);
    for (std::size_t s = 0; s < steps; ++s) {
      const auto idx = batcher.next_indices();
      const QBatch b = batcher.make(idx);
      const std::string where = fmt::format("epoch {} step {}", epoch, s);
      try {
        Graph gq;
        zero_all(p);
        Var lq = loss_cql(gq, p, b, config.lambda, config.gamma);
        cql_sum += lq.value().item();
        gq.backward(lq);
        q_opt.step();
        if (contrastive) {
          std::vector<int> lab(idx.size());
          if (config.label_mode == LabelMode::kBatch) {
            std::vector<int> lv(idx.size());
            std::vector<double> gv(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) {
              lv[k] = level_of[idx[k]];
              gv[k] = g[idx[k]];
            }
            const BatchLabels bl = assign_batch_labels(lv, gv, config.K);
            lab = bl.labels;
            m.unlabeled_samples += bl.skipped_samples;
          } else {
            for (std::size_t k = 0; k < idx.size(); ++k) lab[k] = dataset_labels[idx[k]];
          }
          std::vector<std::size_t> rows;
          std::vector<int> kept;
          for (std::size_t k = 0; k < lab.size(); ++k) {
            if (lab[k] <= 0) continue;
            rows.push_back(k);
            kept.push_back(lab[k]);
            ++hist[static_cast<std::size_t>(lab[k])];
            churn += lab[k] != dataset_labels[idx[k]];
          }
          labeled += rows.size();
          std::optional<Var> ln;
          Graph gn;
          if (!rows.empty()) {
            Var z = p.encode(gn, gn.constant(select_rows(b.obs, rows)));
            if (config.loss == ContrastiveLoss::kCce) {
              ln = loss_nce(gn, p, z, kept, config.tau);
            } else {
              ln = loss_pairwise_infonce(gn, p, z, kept, config.tau);
            }
          }
          if (ln) {
            zero_all(p);
            nce_sum += ln->value().item();
            ++nce_steps;
            gn.backward(*ln);
            nce_opt.step();
          } else {
            ++m.nce_skipped_batches;
          }
        }
      } catch (const NumericError& e) {
        abort_run(p, config, where, e);
      }
      ema_update(targets, sources, config.ema);
    }
    m.cql_loss = cql_sum / static_cast<double>(steps);
    m.nce_loss = nce_steps > 0 ? nce_sum / static_cast<double>(nce_steps) : kNaN;
    m.label_entropy = contrastive ? entropy(hist) : kNaN;
    m.label_churn =
        contrastive && labeled > 0 ? static_cast<double>(churn) / static_cast<double>(labeled) : kNaN;
    finish_epoch(m, p, eval);
    logger().info("{} epoch {}: cql {:.5f} nce {:.5f} return train {:.3f} test {:.3f}",
                  contrastive ? "gsf" : "cql", epoch, m.cql_loss, m.nce_loss,
                  m.eval_return_train, m.eval_return_test);
    run.metrics.push_back(m);
  }
  return run;
}

AgentRun train_cql(const OfflineDataset& ds, const AgentConfig& config, std::uint64_t seed,
                   const EvalFn& eval) {
  return train_gsf(ds, nullptr, config, seed, eval, false);
}

AgentRun train_bc(const OfflineDataset& ds, const AgentConfig& config, std::uint64_t seed,
                  const EvalFn& eval) {
  validate(config);
  ds.check_split();
  StageTimer timer("train-bc");
  const std::size_t steps = steps_per_epoch(ds, config);
  Rng init = make_rng(seed, streams::kAgentInit);
  AgentRun run{AgentParams(ds.obs_dim(), ds.family.mdp.action_count, config, init), {}};
  AgentParams& p = run.params;
  Optimizer opt(p.q_parameters(), config.optimizer);
  Batcher batcher(ds, config, seed);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.cql_loss = m.nce_loss = m.label_entropy = m.label_churn = kNaN;
    double sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const QBatch b = batcher.make(batcher.next_indices());
      try {
        Graph g;
        zero_all(p);
        Var l = loss_bc(g, p, b.obs, b.actions);
        sum += l.value().item();
        g.backward(l);
        opt.step();
      } catch (const NumericError& e) {
        abort_run(p, config, fmt::format("epoch {} step {}", epoch, s), e);
      }
    }
    m.bc_loss = sum / static_cast<double>(steps);
    finish_epoch(m, p, eval);
    logger().info("bc epoch {}: loss {:.5f} return train {:.3f} test {:.3f}", epoch, m.bc_loss,
                  m.eval_return_train, m.eval_return_test);
    run.metrics.push_back(m);
  }
  return run;
}

namespace {

void write_lines(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
  std::string s = "epoch,cql_loss,nce_loss,eval_return_train,eval_return_test\n";
  for (const auto& m : metrics) {
    s += fmt::format("{},{},{},{},{}\n", m.epoch, m.cql_loss, m.nce_loss, m.eval_return_train,
                     m.eval_return_test);
  }
  write_lines(path, s);
}

void write_diagnostics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
  std::string s = "epoch,bc_loss,label_entropy,label_churn,nce_skipped_batches,unlabeled_samples\n";
  for (const auto& m : metrics) {
    s += fmt::format("{},{},{},{},{},{}\n", m.epoch, m.bc_loss, m.label_entropy, m.label_churn,
                     m.nce_skipped_batches, m.unlabeled_samples);
  }
  write_lines(path, s);
}

namespace {

// Tiny agent whose ReLU pre-activations on the case inputs are all at least
// 1e-3 from the kink, so central differences see a smooth function.
struct LossCase {
  AgentParams p;
  QBatch b;
  std::vector<int> labels;
  double lambda = 1.0, gamma = 0.9, tau = 0.5;
};

bool clear_of_kinks(const Mlp& net, const Tensor& x) {
  Tensor h = x;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = layers[i].predict(h);
    for (double& v : h.data()) {
      if (std::abs(v) < 1e-3) return false;
      v = std::max(v, 0.0);
    }
  }
  return true;
}

std::shared_ptr<LossCase> make_loss_case(Rng& rng, bool labels_need_pairs) {
  std::uniform_int_distribution<std::size_t> dim(3, 6);
  for (;;) {
    AgentConfig cfg;
    cfg.encoder_hidden = {dim(rng)};
    cfg.latent_dim = dim(rng);
    cfg.projection_hidden = {dim(rng)};
    cfg.K = 3;
    const std::size_t obs_dim = dim(rng), A = 4, B = 6;
    auto c = std::make_shared<LossCase>();
    c->p = AgentParams(obs_dim, A, cfg, rng);
    // Decouple target from online so the bootstrap term is not symmetric.
    for (Parameter* t : c->p.ema_targets()) {
      for (double& v : t->value.data()) v += 0.1 * (std::uniform_real_distribution<double>(-1, 1)(rng));
    }
    c->b.obs = random_tensor(rng, B, obs_dim);
    c->b.next_obs = random_tensor(rng, B, obs_dim);
    c->b.mu = Tensor::matrix(B, A);
    std::uniform_int_distribution<std::size_t> act(0, A - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t r = 0; r < B; ++r) {
      c->b.actions.push_back(act(rng));
      c->b.rewards.push_back(u(rng));
      c->b.not_done.push_back(u(rng) < 0.8 ? 1.0 : 0.0);
      double s = 0.0;
      for (std::size_t a = 0; a < A; ++a) s += c->b.mu(r, a) = u(rng) + 0.05;
      for (std::size_t a = 0; a < A; ++a) c->b.mu(r, a) /= s;
    }
    std::uniform_int_distribution<int> lab(1, static_cast<int>(cfg.K));
    for (std::size_t r = 0; r < B; ++r) c->labels.push_back(lab(rng));
    if (labels_need_pairs) {
      c->labels[0] = c->labels[1] = 1;
      c->labels[2] = 2;
    }
    c->lambda = 0.5 + 1.5 * u(rng);
    c->tau = 0.3 + u(rng);
    const Tensor z = c->p.encoder.predict(c->b.obs);
    if (!clear_of_kinks(c->p.encoder, c->b.obs) || !clear_of_kinks(c->p.projection, z)) continue;
    return c;
  }
}

}  // namespace

const std::vector<GradCaseFactory>& loss_gradient_cases() {
  static const std::vector<GradCaseFactory> cases = {
      {"loss_cql",
       [](Rng& rng) {
         auto lc = make_loss_case(rng, false);
         auto c = std::make_unique<GradCase>();
         c->state = lc;
         c->external = lc->p.q_parameters();
         c->loss = [lc](Graph& g) { return loss_cql(g, lc->p, lc->b, lc->lambda, lc->gamma); };
         return c;
       }},
      {"loss_nce",
       [](Rng& rng) {
         auto lc = make_loss_case(rng, false);
         auto c = std::make_unique<GradCase>();
         c->state = lc;
         c->external = lc->p.nce_parameters();
         c->loss = [lc](Graph& g) {
           return loss_nce(g, lc->p, lc->p.encode(g, g.constant(lc->b.obs)), lc->labels, lc->tau);
         };
         return c;
       }},
      {"loss_pairwise_infonce",
       [](Rng& rng) {
         auto lc = make_loss_case(rng, true);
         auto c = std::make_unique<GradCase>();
         c->state = lc;
         auto params = lc->p.projection.parameters();
         for (Parameter* q : lc->p.encoder.parameters()) params.push_back(q);
         c->external = params;
         c->loss = [lc](Graph& g) {
           return *loss_pairwise_infonce(g, lc->p, lc->p.encode(g, g.constant(lc->b.obs)),
                                         lc->labels, lc->tau);
         };
         return c;
       }},
  };
  return cases;
}

}  // namespace gsf
