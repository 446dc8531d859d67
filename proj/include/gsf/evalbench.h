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

// Zero-shot evaluation: greedy rollouts on train and held-out test levels,
// per-level mean returns, and baseline-normalized comparison tables.

#ifndef GSF_EVALBENCH_H_
#define GSF_EVALBENCH_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gsf/agent.h"
#include "gsf/env.h"
#include "gsf/random.h"

namespace gsf {

enum class Split { kTrain, kTest };
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct EvalConfig {
  std::size_t episodes_per_level = 12;  // starts are cycled through
  std::size_t max_steps = 0;            // 0: the family's episode cap
  std::vector<Split> splits = {Split::kTrain, Split::kTest};
};

struct LevelReturn {
  Split split = Split::kTest;
  int level_id = 0;
  double mean_return = 0.0;
  std::size_t episodes = 0;
};

struct EvalResult {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<LevelReturn> levels;

  double mean(Split s) const;
  double median(Split s) const;
};

// Action at latent cell `state` of `level`; may draw from rng.
using StepPolicy = std::function<std::size_t(const LevelSpec& level, std::size_t state, Rng& rng)>;

EvalResult evaluate_policy(const StepPolicy& policy, const Family& family,
                           const EvalConfig& config, std::uint64_t seed,
                           const std::string& method);

// Greedy argmax-Q policy. Observations depend only on (level, cell), so the
// greedy action of every cell is computed once per level.
EvalResult evaluate(const AgentParams& params, const Family& family, const EvalConfig& config,
                    std::uint64_t seed, const std::string& method);

// Shortest-path policy from BFS distances; returns 1 from every start.
StepPolicy oracle_policy(const LatentMdp& mdp);
StepPolicy random_policy(std::size_t num_actions);

// method,seed,split,level_id,mean_return
void write_eval_csv(const std::string& path, const std::vector<EvalResult>& results);
std::vector<EvalResult> read_eval_csv(const std::string& path);

struct ComparisonRow {
  std::string method;
  Split split = Split::kTest;
  std::vector<std::uint64_t> seeds;    // seeds with results
  std::vector<std::uint64_t> missing;  // seeds seen for other methods but not this one
  double median_return = 0.0;          // median over seeds of the per-seed mean
  double median_score = 0.0;           // median over seeds of mean / baseline_median - 1
  double q25_score = 0.0;
  double q75_score = 0.0;
};

struct Comparison {
  std::string baseline;
  double baseline_median_train = 0.0;
  double baseline_median_test = 0.0;
  bool normalized = true;  // false when a baseline median is 0
  std::vector<ComparisonRow> rows;

  std::string table() const;
  void write_csv(const std::string& path) const;
};

// Scores use score = mean_return / median(baseline per-seed means) - 1, per
// split. Throws ContractError if the baseline has no results.
Comparison compare(const std::vector<EvalResult>& results, const std::string& baseline);

double median_of(std::vector<double> v);
// Linear interpolation between order statistics.
double percentile_of(std::vector<double> v, double q);

}  // namespace gsf

#endif  // GSF_EVALBENCH_H_
