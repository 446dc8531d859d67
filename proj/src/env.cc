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

#include "gsf/env.h"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "gsf/error.h"
#include "gsf/log.h"
#include "gsf/random.h"

namespace gsf {

std::vector<std::size_t> LatentMdp::free_cells() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < num_cells(); ++c) {
    if (!is_wall(c)) out.push_back(c);
  }
  return out;
}

void LatentMdp::validate() const {
  if (width == 0 || height == 0) throw ContractError("grid must be non-empty");
  if (walls.size() != num_cells()) throw ContractError("wall grid has wrong size");
  if (action_count < 2) throw ContractError("action_count must be >= 2");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractError("gamma must lie in [0,1)");
  if (goal >= num_cells() || is_wall(goal)) throw ContractError("goal must be a free cell");
  if (start_cells.empty()) throw ContractError("no start cells");
  const auto dist = distances_to_goal(*this);
  for (std::size_t s : start_cells) {
    if (s >= num_cells() || is_wall(s)) throw ContractError("start cell must be free");
    if (dist[s] < 0) {
      throw ContractError("goal unreachable from start cell " + std::to_string(s));
    }
  }
}

StepResult step(const LatentMdp& mdp, std::size_t s, std::size_t a) {
  if (s >= mdp.num_cells()) {
    throw ContractError("cell " + std::to_string(s) + " out of bounds (" +
                        std::to_string(mdp.num_cells()) + " cells)");
  }
  if (a >= mdp.action_count) {
    throw ContractError("action " + std::to_string(a) + " out of range");
  }
  const std::size_t r = s / mdp.width, c = s % mdp.width;
  std::size_t nr = r, nc = c;
  switch (a) {
    case kUp: nr = r == 0 ? r : r - 1; break;
    case kDown: nr = r + 1 == mdp.height ? r : r + 1; break;
    case kLeft: nc = c == 0 ? c : c - 1; break;
    default: nc = c + 1 == mdp.width ? c : c + 1; break;
  }
  std::size_t next = nr * mdp.width + nc;
  if (mdp.is_wall(next)) next = s;
  const bool done = next == mdp.goal;
  return {next, done ? 1.0 : 0.0, done};
}

std::vector<int> distances_to_goal(const LatentMdp& mdp) {
  std::vector<int> dist(mdp.num_cells(), -1);
  std::deque<std::size_t> frontier{mdp.goal};
  dist[mdp.goal] = 0;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop_front();
    const std::size_t r = u / mdp.width, c = u % mdp.width;
    const std::size_t cand[4] = {r > 0 ? u - mdp.width : u, r + 1 < mdp.height ? u + mdp.width : u,
                                 c > 0 ? u - 1 : u, c + 1 < mdp.width ? u + 1 : u};
    for (std::size_t v : cand) {
      if (v == u || mdp.is_wall(v) || dist[v] >= 0) continue;
      dist[v] = dist[u] + 1;
      frontier.push_back(v);
    }
  }
  return dist;
}

const LevelSpec& Family::level(int level_id) const {
  for (const auto* split : {&train, &test}) {
    for (const auto& l : *split) {
      if (l.level_id == level_id) return l;
    }
  }
  throw ContractError("unknown level id " + std::to_string(level_id));
}

namespace {

LatentMdp generate_layout(Rng& rng, const FamilyConfig& cfg) {
  if (cfg.width * cfg.height < cfg.num_starts + 1) {
    throw ContractError("grid too small for the requested start cells");
  }
  for (std::size_t attempt = 0; attempt < cfg.max_retries; ++attempt) {
    LatentMdp m;
    m.width = cfg.width;
    m.height = cfg.height;
    m.gamma = cfg.gamma;
    m.max_steps = cfg.max_steps;
    m.walls.assign(m.num_cells(), 0);
    std::bernoulli_distribution wall(cfg.wall_density);
    for (auto& w : m.walls) w = wall(rng) ? 1 : 0;
    auto free = m.free_cells();
    if (free.size() < cfg.num_starts + 1) continue;
    std::shuffle(free.begin(), free.end(), rng);
    m.goal = free[0];
    // Every free cell must reach the goal, not only the start cells.
    const auto dist = distances_to_goal(m);
    const bool connected =
        std::all_of(free.begin(), free.end(), [&](std::size_t c) { return dist[c] >= 0; });
    if (!connected) continue;
    m.start_cells.assign(free.begin() + 1, free.begin() + 1 + static_cast<long>(cfg.num_starts));
    std::sort(m.start_cells.begin(), m.start_cells.end());
    m.validate();
    if (attempt > 0) logger().debug("layout accepted after {} retries", attempt);
    return m;
  }
  throw ContractError("no connected layout after " + std::to_string(cfg.max_retries) +
                      " attempts (wall_density " + std::to_string(cfg.wall_density) + ")");
}

LevelSpec generate_level(const LatentMdp& mdp, const FamilyConfig& cfg, int id,
                         std::uint64_t seed) {
  Rng rng(seed);
  LevelSpec l;
  l.level_id = id;
  l.seed = seed;
  std::iota(l.channel_permutation.begin(), l.channel_permutation.end(), std::size_t{0});
  std::shuffle(l.channel_permutation.begin() + 3, l.channel_permutation.end(), rng);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  l.noise_mask.resize(mdp.num_cells());
  for (double& v : l.noise_mask) v = u01(rng);
  auto free = mdp.free_cells();
  std::shuffle(free.begin(), free.end(), rng);
  const auto n_distract = static_cast<std::size_t>(
      std::llround(cfg.distractor_fraction * static_cast<double>(free.size())));
  l.distractor_cells.assign(free.begin(), free.begin() + static_cast<long>(n_distract));
  std::sort(l.distractor_cells.begin(), l.distractor_cells.end());
  l.background = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
  l.noise_amplitude = cfg.noise_amplitude;
  return l;
}

}  // namespace

Family generate_family(std::uint64_t master_seed, std::size_t m_train, std::size_t m_test,
                       const FamilyConfig& config) {
  if (m_train < 1 || m_test < 1) throw ContractError("m_train and m_test must be >= 1");
  Family f;
  f.master_seed = master_seed;
  f.config = config;
  Rng rng = make_rng(master_seed, streams::kFamily);
  f.mdp = generate_layout(rng, config);
  const std::uint64_t level_base = derive_seed(master_seed, streams::kFamily);
  for (std::size_t i = 0; i < m_train + m_test; ++i) {
    const int id = static_cast<int>(i);
    LevelSpec l = generate_level(f.mdp, config, id, derive_seed(level_base, 1000 + i));
    (i < m_train ? f.train : f.test).push_back(std::move(l));
  }
  return f;
}

void observe_into(const LatentMdp& mdp, const LevelSpec& level, std::size_t s,
                  std::span<double> out) {
  const std::size_t n = mdp.num_cells();
  if (s >= n) throw ContractError("observe: cell " + std::to_string(s) + " out of bounds");
  if (out.size() != kNumChannels * n) throw ShapeError("observe: output buffer has wrong size");
  std::fill(out.begin(), out.end(), 0.0);
  const auto& p = level.channel_permutation;
  auto plane = [&](std::size_t semantic) { return out.subspan(p[semantic] * n, n); };
  plane(0)[s] = 1.0;
  auto walls = plane(1), background = plane(4), noise = plane(5);
  for (std::size_t c = 0; c < n; ++c) {
    walls[c] = mdp.is_wall(c) ? 1.0 : 0.0;
    background[c] = mdp.is_wall(c) ? 0.0 : level.background;
    noise[c] = level.noise_mask[c] * level.noise_amplitude;
  }
  plane(2)[mdp.goal] = 1.0;
  auto distract = plane(3);
  for (std::size_t c : level.distractor_cells) distract[c] = 1.0;
}

Tensor observe(const LatentMdp& mdp, const LevelSpec& level, std::size_t s) {
  Tensor t({kNumChannels, mdp.height, mdp.width}, 0.0);
  observe_into(mdp, level, s, t.data());
  return t;
}

void to_json(nlohmann::json& j, const FamilyConfig& c) {
  j = {{"width", c.width},
       {"height", c.height},
       {"wall_density", c.wall_density},
       {"num_starts", c.num_starts},
       {"gamma", c.gamma},
       {"max_steps", c.max_steps},
       {"distractor_fraction", c.distractor_fraction},
       {"noise_amplitude", c.noise_amplitude},
       {"max_retries", c.max_retries}};
}

void from_json(const nlohmann::json& j, FamilyConfig& c) {
  j.at("width").get_to(c.width);
  j.at("height").get_to(c.height);
  j.at("wall_density").get_to(c.wall_density);
  j.at("num_starts").get_to(c.num_starts);
  j.at("gamma").get_to(c.gamma);
  j.at("max_steps").get_to(c.max_steps);
  j.at("distractor_fraction").get_to(c.distractor_fraction);
  j.at("noise_amplitude").get_to(c.noise_amplitude);
  j.at("max_retries").get_to(c.max_retries);
}

namespace {

nlohmann::json level_json(const LevelSpec& l) {
  return {{"level_id", l.level_id},
          {"seed", l.seed},
          {"channel_permutation", l.channel_permutation},
          {"noise_mask", l.noise_mask},
          {"distractor_cells", l.distractor_cells},
          {"background", l.background},
          {"noise_amplitude", l.noise_amplitude}};
}

LevelSpec level_from_json(const nlohmann::json& j) {
  LevelSpec l;
  j.at("level_id").get_to(l.level_id);
  j.at("seed").get_to(l.seed);
  j.at("channel_permutation").get_to(l.channel_permutation);
  j.at("noise_mask").get_to(l.noise_mask);
  j.at("distractor_cells").get_to(l.distractor_cells);
  j.at("background").get_to(l.background);
  j.at("noise_amplitude").get_to(l.noise_amplitude);
  return l;
}

}  // namespace

void to_json(nlohmann::json& j, const Family& f) {
  nlohmann::json train = nlohmann::json::array(), test = nlohmann::json::array();
  for (const auto& l : f.train) train.push_back(level_json(l));
  for (const auto& l : f.test) test.push_back(level_json(l));
  j = {{"format", "gsf-family"},
       {"version", 1},
       {"master_seed", f.master_seed},
       {"config", f.config},
       {"channels", {"agent", "walls", "goal", "distractor", "background", "noise"}},
       {"mdp",
        {{"width", f.mdp.width},
         {"height", f.mdp.height},
         {"walls", f.mdp.walls},
         {"goal", f.mdp.goal},
         {"start_cells", f.mdp.start_cells},
         {"action_count", f.mdp.action_count},
         {"gamma", f.mdp.gamma},
         {"max_steps", f.mdp.max_steps}}},
       {"train", train},
       {"test", test}};
}

void from_json(const nlohmann::json& j, Family& f) {
  if (j.value("format", "") != "gsf-family") throw IoError("not a family file");
  if (j.value("version", 0) != 1) throw IoError("unsupported family file version");
  j.at("master_seed").get_to(f.master_seed);
  j.at("config").get_to(f.config);
  const auto& m = j.at("mdp");
  m.at("width").get_to(f.mdp.width);
  m.at("height").get_to(f.mdp.height);
  m.at("walls").get_to(f.mdp.walls);
  m.at("goal").get_to(f.mdp.goal);
  m.at("start_cells").get_to(f.mdp.start_cells);
  m.at("action_count").get_to(f.mdp.action_count);
  m.at("gamma").get_to(f.mdp.gamma);
  m.at("max_steps").get_to(f.mdp.max_steps);
  f.train.clear();
  f.test.clear();
  for (const auto& l : j.at("train")) f.train.push_back(level_from_json(l));
  for (const auto& l : j.at("test")) f.test.push_back(level_from_json(l));
  f.mdp.validate();
}

void save_family(const std::string& path, const Family& family) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << nlohmann::json(family).dump(1) << '\n';
}

Family load_family(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open family file '" + path + "'");
  try {
    return nlohmann::json::parse(is).get<Family>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace gsf
