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

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsf/binio.h"
#include "gsf/dataset.h"
#include "gsf/error.h"
#include "gsf/log.h"
#include "gsf/random.h"

namespace gsf {

std::size_t TabularQ::greedy(std::size_t s) const {
  std::size_t best = 0;
  for (std::size_t a = 1; a < num_actions; ++a) {
    if (at(s, a) > at(s, best)) best = a;
  }
  return best;
}

int greedy_path_length(const LatentMdp& mdp, const TabularQ& q, std::size_t s) {
  for (std::size_t t = 0; t < mdp.max_steps; ++t) {
    if (s == mdp.goal) return static_cast<int>(t);
    s = step(mdp, s, q.greedy(s)).next;
  }
  return s == mdp.goal ? static_cast<int>(mdp.max_steps) : -1;
}

TabularQ train_behavior_policy(const LatentMdp& mdp, const BehaviorConfig& config,
                               std::uint64_t seed) {
  if (config.episodes < 1) throw ContractError("behavior training needs >= 1 episode");
  mdp.validate();
  StageTimer timer("behavior");
  TabularQ q(mdp.num_cells(), mdp.action_count);
  Rng rng = make_rng(seed, streams::kBehavior);
  std::vector<std::size_t> starts;
  for (std::size_t c : mdp.free_cells()) {
    if (c != mdp.goal) starts.push_back(c);
  }
  std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_action(0, mdp.action_count - 1);
  std::bernoulli_distribution explore(config.epsilon);
  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    std::size_t s = starts[pick_start(rng)];
    for (std::size_t t = 0; t < mdp.max_steps; ++t) {
      const std::size_t a = explore(rng) ? pick_action(rng) : q.greedy(s);
      const StepResult r = step(mdp, s, a);
      const double target = r.reward + (r.done ? 0.0 : mdp.gamma * q.at(r.next, q.greedy(r.next)));
      q.at(s, a) += config.learning_rate * (target - q.at(s, a));
      if (r.done) break;
      s = r.next;
    }
  }
  const auto dist = distances_to_goal(mdp);
  std::string failures;
  for (std::size_t s : mdp.start_cells) {
    const int len = greedy_path_length(mdp, q, s);
    if (len < 0 || len > 2 * dist[s]) {
      failures += " start " + std::to_string(s) + " (greedy " + std::to_string(len) +
                  ", shortest " + std::to_string(dist[s]) + ")";
    }
  }
  if (!failures.empty()) {
    throw NumericError("behavior policy did not converge after " +
                       std::to_string(config.episodes) + " episodes:" + failures);
  }
  return q;
}

double behavior_prob(const Transition& tr, std::size_t a, std::size_t num_actions) {
  const double uniform = tr.epsilon / static_cast<double>(num_actions);
  return a == tr.greedy_action ? uniform + (1.0 - tr.epsilon) : uniform;
}

double epsilon_at(const CollectConfig& c, std::size_t t) {
  return c.eps_start -
         (c.eps_start - c.eps_end) * static_cast<double>(t) / static_cast<double>(c.total_steps);
}

namespace {

std::size_t train_position(const Family& f, int level_id) {
  for (std::size_t i = 0; i < f.train.size(); ++i) {
    if (f.train[i].level_id == level_id) return i;
  }
  throw ContractError("level " + std::to_string(level_id) + " is not a training level");
}

// Rolls one episode starting at global step `t0`, stopping early at the
// step budget.
std::vector<Transition> run_episode(const Family& family, const TabularQ& behavior,
                                    const CollectConfig& config, std::uint64_t seed,
                                    std::uint32_t episode, std::size_t t0) {
  const LatentMdp& mdp = family.mdp;
  const LevelSpec& level = family.train[episode % family.train.size()];
  Rng rng(derive_seed(derive_seed(seed, streams::kCollect), episode));
  std::uniform_int_distribution<std::size_t> pick_start(0, mdp.start_cells.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_action(0, mdp.action_count - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Transition> out;
  std::size_t s = mdp.start_cells[pick_start(rng)];
  for (std::size_t t = 0; t < mdp.max_steps && t0 + t < config.total_steps; ++t) {
    Transition tr;
    tr.level_id = level.level_id;
    tr.episode = episode;
    tr.t = static_cast<std::uint32_t>(t);
    tr.state = static_cast<std::uint32_t>(s);
    tr.epsilon = epsilon_at(config, t0 + t);
    tr.greedy_action = static_cast<std::uint8_t>(behavior.greedy(s));
    const bool random = u01(rng) < tr.epsilon;
    const std::size_t a = random ? pick_action(rng) : tr.greedy_action;
    const StepResult r = step(mdp, s, a);
    tr.action = static_cast<std::uint8_t>(a);
    tr.reward = r.reward;
    tr.next_state = static_cast<std::uint32_t>(r.next);
    tr.done = r.done;
    out.push_back(tr);
    if (r.done) break;
    s = r.next;
  }
  if (!out.empty()) out.back().last = true;
  return out;
}

}  // namespace

std::span<const double> OfflineDataset::obs(int level_id, std::size_t cell) const {
  const std::size_t row = train_position(family, level_id) * family.mdp.num_cells() + cell;
  return std::span<const double>(obs_table).subspan(row * obs_dim(), obs_dim());
}

long OfflineDataset::successor(std::size_t i) const {
  return transitions[i].last ? -1 : static_cast<long>(i + 1);
}

std::vector<int> OfflineDataset::level_ids() const {
  std::vector<int> ids;
  for (const auto& [id, n] : level_counts()) ids.push_back(id);
  return ids;
}

std::map<int, std::vector<std::size_t>> OfflineDataset::level_index() const {
  std::map<int, std::vector<std::size_t>> idx;
  for (std::size_t i = 0; i < transitions.size(); ++i) idx[transitions[i].level_id].push_back(i);
  return idx;
}

std::map<int, std::size_t> OfflineDataset::level_counts() const {
  std::map<int, std::size_t> counts;
  for (const auto& tr : transitions) ++counts[tr.level_id];
  return counts;
}

void OfflineDataset::check_split() const {
  for (const auto& l : family.test) {
    for (const auto& tr : transitions) {
      if (tr.level_id == l.level_id) {
        throw ContractError("dataset contains transitions from test level " +
                            std::to_string(l.level_id));
      }
    }
  }
}

void OfflineDataset::build_obs_table() {
  const std::size_t n = family.mdp.num_cells();
  obs_table.assign(family.train.size() * n * obs_dim(), 0.0);
  for (std::size_t li = 0; li < family.train.size(); ++li) {
    for (std::size_t c = 0; c < n; ++c) {
      observe_into(family.mdp, family.train[li], c,
                   std::span<double>(obs_table).subspan((li * n + c) * obs_dim(), obs_dim()));
    }
  }
}

OfflineDataset collect(const Family& family, const TabularQ& behavior, const CollectConfig& config,
                       std::uint64_t seed) {
  if (!(0.0 <= config.eps_end && config.eps_end <= config.eps_start && config.eps_start <= 1.0)) {
    throw ContractError("epsilon schedule must satisfy 0 <= eps_end <= eps_start <= 1");
  }
  if (config.total_steps < 1) throw ContractError("total_steps must be >= 1");
  StageTimer timer("collect");
  OfflineDataset ds;
  ds.family = family;
  ds.collect = config;
  ds.seed = seed;
  ds.behavior = behavior;
  ds.transitions.reserve(config.total_steps);
  for (std::uint32_t ep = 0; ds.transitions.size() < config.total_steps; ++ep) {
    auto steps = run_episode(family, behavior, config, seed, ep, ds.transitions.size());
    ds.transitions.insert(ds.transitions.end(), steps.begin(), steps.end());
  }
  ds.build_obs_table();
  return ds;
}

std::vector<Transition> replay_episode(const Family& family, const TabularQ& behavior,
                                       const CollectConfig& config, std::uint64_t seed,
                                       std::uint32_t episode, std::size_t start_step) {
  return run_episode(family, behavior, config, seed, episode, start_step);
}

namespace {

constexpr char kMagic[8] = {'G', 'S', 'F', 'D', 'A', 'T', 'A', '\0'};
constexpr std::uint16_t kRecordBytes = 4 + 4 + 4 + 4 + 4 + 1 + 1 + 1 + 8 + 8;

nlohmann::json header_json(const OfflineDataset& ds) {
  std::vector<int> train_ids, test_ids;
  for (const auto& l : ds.family.train) train_ids.push_back(l.level_id);
  for (const auto& l : ds.family.test) test_ids.push_back(l.level_id);
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [id, n] : ds.level_counts()) counts[std::to_string(id)] = n;
  return {{"format", "gsf-dataset"},
          {"seed", ds.seed},
          {"collect",
           {{"total_steps", ds.collect.total_steps},
            {"eps_start", ds.collect.eps_start},
            {"eps_end", ds.collect.eps_end}}},
          {"obs_shape", {kNumChannels, ds.family.mdp.height, ds.family.mdp.width}},
          {"transition_count", ds.transitions.size()},
          {"level_counts", counts},
          {"split", {{"train_level_ids", train_ids}, {"excluded_test_level_ids", test_ids}}},
          {"behavior",
           {{"num_states", ds.behavior.num_states},
            {"num_actions", ds.behavior.num_actions},
            {"q", ds.behavior.q}}},
          {"family", ds.family}};
}

}  // namespace

void save_dataset(const std::string& path, const OfflineDataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  binio::put<std::uint8_t>(os, OfflineDataset::kVersion);
  binio::put_string(os, header_json(ds).dump());
  binio::put_vector(os, ds.obs_table);
  binio::put<std::uint64_t>(os, ds.transitions.size());
  for (const auto& tr : ds.transitions) {
    binio::put<std::uint16_t>(os, kRecordBytes);
    binio::put<std::int32_t>(os, tr.level_id);
    binio::put(os, tr.episode);
    binio::put(os, tr.t);
    binio::put(os, tr.state);
    binio::put(os, tr.next_state);
    binio::put(os, tr.action);
    binio::put(os, tr.greedy_action);
    binio::put<std::uint8_t>(os, static_cast<std::uint8_t>((tr.done ? 1 : 0) | (tr.last ? 2 : 0)));
    binio::put(os, tr.reward);
    binio::put(os, tr.epsilon);
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

OfflineDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset '" + path + "'");
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw IoError(path + ": not a dataset file (bad magic)");
  }
  const auto version = binio::get<std::uint8_t>(is, "dataset version");
  if (version != OfflineDataset::kVersion) {
    throw IoError(path + ": unsupported dataset version " + std::to_string(version));
  }
  OfflineDataset ds;
  try {
    const auto h = nlohmann::json::parse(binio::get_string(is, "dataset header"));
    h.at("seed").get_to(ds.seed);
    h.at("collect").at("total_steps").get_to(ds.collect.total_steps);
    h.at("collect").at("eps_start").get_to(ds.collect.eps_start);
    h.at("collect").at("eps_end").get_to(ds.collect.eps_end);
    h.at("behavior").at("num_states").get_to(ds.behavior.num_states);
    h.at("behavior").at("num_actions").get_to(ds.behavior.num_actions);
    h.at("behavior").at("q").get_to(ds.behavior.q);
    h.at("family").get_to(ds.family);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": bad dataset header: " + e.what());
  }
  ds.obs_table = binio::get_vector<double>(is, "observation table");
  if (ds.obs_table.size() != ds.family.train.size() * ds.family.mdp.num_cells() * ds.obs_dim()) {
    throw IoError(path + ": observation table size does not match the family");
  }
  const auto count = binio::get<std::uint64_t>(is, "transition count");
  ds.transitions.resize(count);
  for (auto& tr : ds.transitions) {
    const auto len = binio::get<std::uint16_t>(is, "record length");
    if (len != kRecordBytes) throw IoError(path + ": unexpected record length");
    tr.level_id = binio::get<std::int32_t>(is, "level_id");
    tr.episode = binio::get<std::uint32_t>(is, "episode");
    tr.t = binio::get<std::uint32_t>(is, "t");
    tr.state = binio::get<std::uint32_t>(is, "state");
    tr.next_state = binio::get<std::uint32_t>(is, "next_state");
    tr.action = binio::get<std::uint8_t>(is, "action");
    tr.greedy_action = binio::get<std::uint8_t>(is, "greedy_action");
    const auto flags = binio::get<std::uint8_t>(is, "flags");
    tr.done = (flags & 1) != 0;
    tr.last = (flags & 2) != 0;
    tr.reward = binio::get<double>(is, "reward");
    tr.epsilon = binio::get<double>(is, "epsilon");
  }
  ds.check_split();
  return ds;
}

void export_jsonl(const std::string& path, const OfflineDataset& ds) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& tr : ds.transitions) {
    os << nlohmann::json{{"level_id", tr.level_id}, {"episode", tr.episode},
                         {"t", tr.t},               {"state", tr.state},
                         {"action", tr.action},     {"reward", tr.reward},
                         {"next_state", tr.next_state}, {"done", tr.done},
                         {"last", tr.last},         {"epsilon", tr.epsilon},
                         {"greedy_action", tr.greedy_action}}
              .dump()
       << '\n';
  }
}

}  // namespace gsf
