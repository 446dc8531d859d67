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

// Offline agents over flattened observations: the GSF agent (CQL plus a
// label-classification contrastive loss on quantile-bin labels), the
// CQL-only baseline and behavioral cloning.
//
// Q(o, .) = f(o) theta_a with a linear last encoder layer and no bias in
// theta_a. The contrastive path is W^T h(f(o)) / tau.

#ifndef GSF_AGENT_H_
#define GSF_AGENT_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsf/autodiff.h"
#include "gsf/checkpoint.h"
#include "gsf/dataset.h"
#include "gsf/gradcheck.h"
#include "gsf/gvf.h"
#include "gsf/nn.h"
#include "gsf/optim.h"

namespace gsf {

enum class ContrastiveLoss { kCce, kPairwise };
ContrastiveLoss parse_contrastive_loss(const std::string& s);
std::string to_string(ContrastiveLoss loss);

// kBatch: quantiles per level from each minibatch. kDataset: quantiles per
// level from every logged observation, computed once.
enum class LabelMode { kBatch, kDataset };
LabelMode parse_label_mode(const std::string& s);
std::string to_string(LabelMode mode);

struct AgentConfig {
  std::vector<std::size_t> encoder_hidden = {128, 128};
  std::size_t latent_dim = 64;
  std::vector<std::size_t> projection_hidden = {64};
  std::size_t batch_size = 256;
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 0;  // 0: floor(N / batch_size)
  OptimizerConfig optimizer{OptimizerKind::kAdam, 3e-4};
  std::size_t K = 7;
  double tau = 0.5;
  double lambda = 1.0;
  double ema = 0.005;
  double gamma = 0.99;
  std::size_t pad = 2;
  ContrastiveLoss loss = ContrastiveLoss::kCce;
  LabelMode label_mode = LabelMode::kBatch;
  std::string abort_checkpoint;  // written if a loss turns non-finite
};

void validate(const AgentConfig& c);

struct AgentParams {
  AgentParams() = default;
  AgentParams(std::size_t obs_dim, std::size_t num_actions, const AgentConfig& config, Rng& rng);

  std::size_t obs_dim = 0;
  std::size_t num_actions = 0;
  std::size_t K = 0;
  Mlp encoder;     // obs -> Z, last layer linear
  Mlp projection;  // Z -> Z
  Parameter theta_a;  // Z x |A|
  Parameter W;        // Z x K
  Mlp target_encoder;
  Parameter target_theta_a;

  Var encode(Graph& g, Var obs);
  Var q(Graph& g, Var z);
  Var logits(Graph& g, Var z, double tau);
  Tensor q_values(const Tensor& obs, bool target = false) const;
  // Greedy action per row; ties go to the lowest index.
  std::vector<std::size_t> act(const Tensor& obs) const;

  std::vector<Parameter*> q_parameters();    // encoder, theta_a
  std::vector<Parameter*> nce_parameters();  // projection, encoder, W
  std::vector<Parameter*> ema_sources();     // encoder, theta_a
  std::vector<Parameter*> ema_targets();     // target encoder, target theta_a
  std::vector<Parameter*> all_parameters();

  Checkpoint to_checkpoint() const;
  static AgentParams from_checkpoint(const Checkpoint& ckpt);
};

// One minibatch for the value losses. mu holds behavior probabilities.
struct QBatch {
  Tensor obs;       // B x obs_dim
  Tensor next_obs;  // B x obs_dim
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<double> not_done;  // 0 for terminal transitions
  Tensor mu;                     // B x |A|
};

// y = r + gamma * not_done * max_a' Q_target(o', a'), held constant.
Tensor td_targets(const AgentParams& p, const QBatch& b, double gamma);
// mean (y - Q(o,a))^2
Var loss_fitted_q(Graph& g, AgentParams& p, const QBatch& b, double gamma);
// Fitted-Q term + lambda * mean(LSE_a Q(o,a) - sum_a mu(a|o) Q(o,a)).
Var loss_cql(Graph& g, AgentParams& p, const QBatch& b, double lambda, double gamma);
// mean over rows of LSE_a Q(o,a) - E_mu Q(o,a), without gradients.
std::vector<double> cql_regularizer(const AgentParams& p, const QBatch& b);

// Mean negative log-softmax of the true class. Labels must be in 1..K.
Var loss_nce(Graph& g, AgentParams& p, Var z, std::span<const int> labels, double tau);

struct PairwiseStats {
  std::size_t classes_used = 0;
  std::size_t classes_skipped = 0;
};
// Per label class present in the batch: S_P = its rows, S_N = the others;
// loss = LSE over negative pairs - LSE over ordered positive pairs (i != j)
// of cos/tau, averaged over classes with a positive and a negative pair.
// Returns nullopt when no class qualifies.
std::optional<Var> loss_pairwise_infonce(Graph& g, AgentParams& p, Var z,
                                         std::span<const int> labels, double tau,
                                         PairwiseStats* stats = nullptr);

// Cross-entropy of logged actions under softmax(Q(o, .)).
Var loss_bc(Graph& g, AgentParams& p, const Tensor& obs, std::span<const std::size_t> actions);

struct EpochMetrics {
  std::size_t epoch = 0;
  double cql_loss = 0.0;  // NaN for BC
  double nce_loss = 0.0;  // NaN when no contrastive step ran
  double eval_return_train = 0.0;
  double eval_return_test = 0.0;
  // Diagnostics.
  double bc_loss = 0.0;
  double label_entropy = 0.0;
  double label_churn = 0.0;  // batch labels differing from dataset labels
  std::size_t nce_skipped_batches = 0;
  std::size_t unlabeled_samples = 0;
};

// (mean train return, mean test return) for the current parameters.
using EvalFn = std::function<std::pair<double, double>(const AgentParams&, std::size_t epoch)>;

struct AgentRun {
  AgentParams params;
  std::vector<EpochMetrics> metrics;
};

// `values` gives G(o) per (level, cell); required unless contrastive is off.
AgentRun train_gsf(const OfflineDataset& ds, const GvfValueTable* values,
                   const AgentConfig& config, std::uint64_t seed, const EvalFn& eval = {},
                   bool contrastive = true);
// train_gsf with the contrastive step skipped. Same seeds, same batches.
AgentRun train_cql(const OfflineDataset& ds, const AgentConfig& config, std::uint64_t seed,
                   const EvalFn& eval = {});
AgentRun train_bc(const OfflineDataset& ds, const AgentConfig& config, std::uint64_t seed,
                  const EvalFn& eval = {});

// epoch,cql_loss,nce_loss,eval_return_train,eval_return_test
void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics);
void write_diagnostics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics);

// Randomized tiny-agent instances of the three training losses.
const std::vector<GradCaseFactory>& loss_gradient_cases();

}  // namespace gsf

#endif  // GSF_AGENT_H_
