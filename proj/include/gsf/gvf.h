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

// Generalized value functions over the offline dataset.
//
// G_i(o_t) = E_mu[ sum_{k>=1} gamma^k c(o_{t+k}, a_{t+k}) ], so the cumulant
// of the current step is excluded. The TD target for a transition with a
// successor step (o', a') is gamma * (c(o', a') + G~(o')); a transition that
// reaches the goal has target 0, and a truncated episode end (no successor)
// is not used for regression.

#ifndef GSF_GVF_H_
#define GSF_GVF_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsf/checkpoint.h"
#include "gsf/dataset.h"
#include "gsf/nn.h"
#include "gsf/optim.h"
#include "gsf/tensor.h"

namespace gsf {

enum class CumulantKind { kReward, kSuccessorFeatures, kActionIndicator };

// "reward", "sf", "action".
CumulantKind parse_cumulant_kind(const std::string& s);
std::string to_string(CumulantKind kind);

struct CumulantSpec {
  CumulantKind kind = CumulantKind::kReward;
  std::size_t dim = 1;
  std::size_t num_actions = 4;
  // Successor features: obs_dim x dim projection. Empty means the identity,
  // used with one-hot (tabular) observations.
  Tensor projection;
  double c_max = 1.0;
};

CumulantSpec make_cumulant(CumulantKind kind, std::size_t obs_dim, std::size_t num_actions,
                           std::size_t sf_dim, std::uint64_t seed);

std::vector<double> eval_cumulant(const CumulantSpec& spec, std::span<const double> obs,
                                  std::size_t action, double reward);

// Identity for one-dimensional values, 1-norm otherwise.
double reduce_gvf(std::span<const double> v);

// TD regression problem shared by every GVF head.
struct GvfSamples {
  std::size_t obs_dim = 0;
  std::array<std::size_t, 3> obs_shape{};  // C, H, W; zeros when not an image
  std::vector<double> obs_table;           // rows of obs_dim values
  std::vector<int> level_ids;              // level position -> level id
  std::size_t cumulant_dim = 1;

  std::vector<std::uint32_t> level_pos;
  std::vector<std::size_t> row;       // observation row of o_t
  std::vector<long> next_row;         // row of o_{t+1}; -1 means target 0
  std::vector<double> next_cumulant;  // cumulant_dim values per sample

  std::size_t size() const { return row.size(); }
  std::size_t num_rows() const { return obs_table.size() / obs_dim; }
  std::span<const double> obs(std::size_t r) const {
    return std::span<const double>(obs_table).subspan(r * obs_dim, obs_dim);
  }
  // Samples of one level, re-indexed as a single-level problem.
  GvfSamples subset_level(int level_id) const;
};

// Observation rows follow the dataset's table. Sets spec.c_max to the
// largest reduced |c| over the used successor steps.
GvfSamples make_gvf_samples(const OfflineDataset& ds, CumulantSpec& spec);

struct GvfConfig {
  std::size_t iterations = 20000;
  std::size_t batch_size = 256;
  bool full_batch = false;  // every sample, in order, each iteration
  OptimizerConfig optimizer{OptimizerKind::kAdam, 1e-3};
  double ema = 0.005;
  double gamma = 0.99;
  double popart_rate = 1e-3;
  // Layer widths after the input; empty encoder means z = o.
  std::vector<std::size_t> encoder_layers = {128, 64};
  std::vector<std::size_t> head_hidden = {128};
  // Without head biases PopArt keeps mu at 0 and rescales only.
  bool head_bias = true;
  std::size_t pad = 0;  // random-crop padding on o_t
  bool joint = true;    // shared encoder over all levels; false: one model per level
  std::size_t threads = 1;
  double divergence_limit = 1e6;
};

class GvfModel {
 public:
  GvfModel() = default;
  GvfModel(std::size_t obs_dim, std::vector<int> level_ids, std::size_t cumulant_dim,
           const GvfConfig& config, Rng& rng);

  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t num_levels() const { return level_ids_.size(); }
  std::size_t cumulant_dim() const { return cumulant_dim_; }
  const std::vector<int>& level_ids() const { return level_ids_; }
  std::size_t level_position(int level_id) const;

  // Normalized outputs of every head, B x (levels * cumulant_dim).
  Var forward(Graph& g, Var obs);
  Tensor predict_normalized(const Tensor& obs, bool target) const;
  // Denormalized values of each row's own level head, B x cumulant_dim.
  Tensor predict(const Tensor& obs, std::span<const std::uint32_t> level_pos,
                 bool target = false) const;

  std::vector<Parameter*> online_parameters();
  std::vector<Parameter*> target_parameters();
  Linear& output_layer(bool target);

  // PopArt statistics, levels x cumulant_dim.
  Tensor mu, nu, sigma;

  Checkpoint to_checkpoint() const;
  static GvfModel from_checkpoint(const Checkpoint& ckpt);

 private:
  std::size_t obs_dim_ = 0;
  std::vector<int> level_ids_;
  std::size_t cumulant_dim_ = 1;
  std::vector<std::size_t> encoder_layers_, head_hidden_;
  bool head_bias_ = true;
  Mlp encoder_, head_, target_encoder_, target_head_;
};

// Moves each level's statistics toward the batch targets (B x cumulant_dim,
// rows labelled by level_pos) and rescales the online and target output
// layers so denormalized predictions are unchanged. A dimension whose batch
// variance is zero keeps its sigma. sigma never drops below 1e-6.
void popart_update(GvfModel& model, std::span<const std::uint32_t> level_pos,
                   const Tensor& targets, double rate);

struct GvfTrainStats {
  std::vector<double> loss;  // one entry per iteration
  std::size_t bound_violations = 0;
};

// Trains `model` in place on `samples`. Throws NumericError when the loss
// exceeds the divergence limit.
GvfTrainStats train_gvf_model(GvfModel& model, const GvfSamples& samples,
                              const GvfConfig& config, std::uint64_t seed);

// Single-level estimator.
GvfModel learn_gvf(const GvfSamples& samples, int level_id, const GvfConfig& config,
                   std::uint64_t seed, GvfTrainStats* stats = nullptr);

// One head per level: a jointly trained model, or independent single-level
// models trained on `config.threads` workers. Results do not depend on the
// thread count.
struct GvfHeads {
  CumulantSpec cumulant;
  bool joint = true;
  std::vector<GvfModel> models;  // one model if joint, else one per level

  // Denormalized prediction for observation rows of one level.
  Tensor predict(int level_id, const Tensor& obs) const;
  std::vector<int> level_ids() const;

  Checkpoint to_checkpoint() const;
  static GvfHeads from_checkpoint(const Checkpoint& ckpt);
};

GvfHeads learn_all_gvfs(const GvfSamples& samples, const CumulantSpec& spec,
                        const GvfConfig& config, std::uint64_t seed);

// Reduced GVF value per (training level, cell) of the dataset, on
// un-augmented observations. Layout matches OfflineDataset::obs_table rows.
struct GvfValueTable {
  std::vector<int> level_ids;
  std::size_t num_cells = 0;
  std::vector<double> values;

  double at(int level_id, std::size_t cell) const;
};

GvfValueTable gvf_value_table(const GvfHeads& heads, const OfflineDataset& ds);

}  // namespace gsf

#endif  // GSF_GVF_H_
