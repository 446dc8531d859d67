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

#ifndef GSF_DATASET_H_
#define GSF_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gsf/env.h"

namespace gsf {

// Tabular action values over latent cells; greedy ties go to the lowest action.
struct TabularQ {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> q;

  TabularQ() = default;
  TabularQ(std::size_t states, std::size_t actions)
      : num_states(states), num_actions(actions), q(states * actions, 0.0) {}
  double& at(std::size_t s, std::size_t a) { return q[s * num_actions + a]; }
  double at(std::size_t s, std::size_t a) const { return q[s * num_actions + a]; }
  std::size_t greedy(std::size_t s) const;
};

struct BehaviorConfig {
  std::size_t episodes = 10000;
  double learning_rate = 0.5;
  double epsilon = 0.3;
};

// Q-learning on latent cells with exploring starts (episodes begin at a
// uniformly drawn free cell). Afterwards the greedy policy must reach the
// goal from every start cell within twice the shortest-path length;
// otherwise throws NumericError listing the offending starts.
TabularQ train_behavior_policy(const LatentMdp& mdp, const BehaviorConfig& config,
                               std::uint64_t seed);

// Number of greedy steps from s to the goal, or -1 if the goal is not
// reached within mdp.max_steps.
int greedy_path_length(const LatentMdp& mdp, const TabularQ& q, std::size_t s);

struct Transition {
  int level_id = 0;
  std::uint32_t episode = 0;
  std::uint32_t t = 0;  // step within the episode
  std::uint32_t state = 0;
  std::uint32_t next_state = 0;
  std::uint8_t action = 0;
  std::uint8_t greedy_action = 0;  // behavior policy's greedy action at `state`
  bool done = false;               // reached the goal
  bool last = false;               // final transition of its episode (done or truncated)
  double reward = 0.0;
  double epsilon = 0.0;  // exploration rate used for this step
};

// Behavior policy probability of `a` for the transition's state.
double behavior_prob(const Transition& tr, std::size_t a, std::size_t num_actions);

struct CollectConfig {
  std::size_t total_steps = 200000;
  double eps_start = 0.1;
  double eps_end = 0.0;
};

// eps_start - (eps_start - eps_end) * t / total_steps.
double epsilon_at(const CollectConfig& c, std::size_t t);

struct OfflineDataset {
  static constexpr std::uint8_t kVersion = 1;

  Family family;  // the dataset only covers family.train
  CollectConfig collect;
  std::uint64_t seed = 0;
  TabularQ behavior;
  std::vector<Transition> transitions;
  // Flat observation table: one row of obs_dim() values per (train level, cell).
  std::vector<double> obs_table;

  std::size_t obs_dim() const { return family.obs_dim(); }
  std::span<const double> obs(int level_id, std::size_t cell) const;
  // Index of the next transition in the same episode, or -1.
  long successor(std::size_t i) const;

  std::vector<int> level_ids() const;
  // Transition indices per level id, in storage order.
  std::map<int, std::vector<std::size_t>> level_index() const;
  std::map<int, std::size_t> level_counts() const;
  // Throws ContractError if any transition comes from a test level.
  void check_split() const;

  void build_obs_table();
};

OfflineDataset collect(const Family& family, const TabularQ& behavior, const CollectConfig& config,
                       std::uint64_t seed);

// Transitions of one episode regenerated from its (level, episode) seed and
// starting global step. Identical to the stored ones.
std::vector<Transition> replay_episode(const Family& family, const TabularQ& behavior,
                                       const CollectConfig& config, std::uint64_t seed,
                                       std::uint32_t episode, std::size_t start_step);

// Binary layout:
//   "GSFDATA\0" | u8 version | string header(JSON) | vector<f64> obs_table |
//   u64 count | count x (u16 length | record bytes)
void save_dataset(const std::string& path, const OfflineDataset& ds);
OfflineDataset load_dataset(const std::string& path);
void export_jsonl(const std::string& path, const OfflineDataset& ds);

}  // namespace gsf

#endif  // GSF_DATASET_H_
