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

// One JSON document configures a whole run. Every key is optional; missing
// keys keep their defaults and unknown keys are rejected with their path.

#ifndef GSF_CONFIG_H_
#define GSF_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsf/agent.h"
#include "gsf/dataset.h"
#include "gsf/env.h"
#include "gsf/evalbench.h"
#include "gsf/gvf.h"
#include "gsf/theory.h"

namespace gsf {

struct TheorySettings {
  BinBoundConfig bin_bound;
  std::size_t visitation_K = 7;
  bool reset_at_goal = true;
};

struct ExperimentConfig {
  std::vector<std::string> methods = {"gsf", "cql", "bc"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string baseline = "cql";
  bool eval_each_epoch = true;
};

struct GradcheckSettings {
  std::size_t instances = 50;
  double h = 1e-5;
  double tol = 1e-4;
};

struct RunConfig {
  std::uint64_t seed = 0;  // family, dataset and GVF seed
  std::string out = "runs/default";
  std::size_t threads = 1;
  std::size_t train_levels = 20;
  std::size_t test_levels = 20;
  FamilyConfig family;
  BehaviorConfig behavior;
  CollectConfig dataset;
  CumulantKind cumulant = CumulantKind::kReward;
  std::size_t sf_dim = 16;
  GvfConfig gvf;
  AgentConfig agent;
  EvalConfig eval;
  TheorySettings theory;
  ExperimentConfig experiment;
  GradcheckSettings gradcheck;
};

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"gsf", "cql", "bc"};
  return m;
}

// Throws ConfigError(path, ...) on unknown keys, wrong types or invalid values.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);
void validate(const RunConfig& c);

// Sets doc[a][b]... for key "a.b..." to `value`, creating objects on the way.
void apply_override(nlohmann::json& doc, const std::string& dotted_key,
                    const nlohmann::json& value);

}  // namespace gsf

#endif  // GSF_CONFIG_H_
