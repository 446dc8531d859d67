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

// Gridworld POMDP family: one latent MDP shared by every level, and a
// per-level observation function.
//
// Observation channels (before the level's channel permutation):
//   0 agent      one-hot agent position
//   1 walls      1 on wall cells
//   2 goal       1 on the goal cell
//   3 distractor 1 on the level's distractor cells (no effect on dynamics)
//   4 background level-specific constant intensity on free cells
//   5 noise      fixed per-level noise mask scaled by the noise amplitude
// Only channels 3..5 are permuted; the semantic channels keep their slots.

#ifndef GSF_ENV_H_
#define GSF_ENV_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gsf/tensor.h"

namespace gsf {

inline constexpr std::size_t kNumChannels = 6;

enum Action : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

struct FamilyConfig {
  std::size_t width = 9;
  std::size_t height = 9;
  double wall_density = 0.15;
  std::size_t num_starts = 6;
  double gamma = 0.99;
  std::size_t max_steps = 100;
  double distractor_fraction = 0.25;
  double noise_amplitude = 0.5;
  std::size_t max_retries = 1000;
};

struct LatentMdp {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> walls;  // row-major, 1 = wall
  std::size_t goal = 0;
  std::vector<std::size_t> start_cells;
  std::size_t action_count = 4;
  double gamma = 0.99;
  std::size_t max_steps = 100;

  std::size_t num_cells() const { return width * height; }
  bool is_wall(std::size_t cell) const { return walls[cell] != 0; }
  std::vector<std::size_t> free_cells() const;
  // Throws ContractError if the layout breaks an invariant.
  void validate() const;
};

struct StepResult {
  std::size_t next = 0;
  double reward = 0.0;
  bool done = false;
};

StepResult step(const LatentMdp& mdp, std::size_t s, std::size_t a);

// Shortest-path length from every cell to the goal; -1 for walls and
// unreachable cells.
std::vector<int> distances_to_goal(const LatentMdp& mdp);

struct LevelSpec {
  int level_id = 0;
  std::uint64_t seed = 0;
  std::array<std::size_t, kNumChannels> channel_permutation{};  // semantic -> slot
  std::vector<double> noise_mask;                               // per cell, in [0,1]
  std::vector<std::size_t> distractor_cells;                    // sorted
  double background = 1.0;
  double noise_amplitude = 0.5;
};

struct Family {
  std::uint64_t master_seed = 0;
  FamilyConfig config;
  LatentMdp mdp;
  std::vector<LevelSpec> train;
  std::vector<LevelSpec> test;

  const LevelSpec& level(int level_id) const;
  std::size_t obs_dim() const { return kNumChannels * mdp.num_cells(); }
};

Family generate_family(std::uint64_t master_seed, std::size_t m_train, std::size_t m_test,
                       const FamilyConfig& config = {});

// Observation of cell s through `level`, shape kNumChannels x H x W.
Tensor observe(const LatentMdp& mdp, const LevelSpec& level, std::size_t s);
// Same values written into a flat buffer of length obs_dim.
void observe_into(const LatentMdp& mdp, const LevelSpec& level, std::size_t s,
                  std::span<double> out);

void to_json(nlohmann::json& j, const FamilyConfig& c);
void from_json(const nlohmann::json& j, FamilyConfig& c);
void to_json(nlohmann::json& j, const Family& f);
void from_json(const nlohmann::json& j, Family& f);

void save_family(const std::string& path, const Family& family);
Family load_family(const std::string& path);

}  // namespace gsf

#endif  // GSF_ENV_H_
