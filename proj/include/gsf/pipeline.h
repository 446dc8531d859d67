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

// File-based pipeline stages. Every stage reads its inputs from and writes
// its artifacts under RunConfig::out:
//
//   resolved_config.json          snapshot of the config used last
//   family.json, dataset.bin      gen-data
//   gvf_<cumulant>.ckpt           train-gvf
//   <method>/seed_<s>/            train: agent.ckpt, metrics.csv, diagnostics.csv
//   eval.csv                      eval (method,seed,split,level_id,mean_return)
//   comparison.csv, comparison.txt  compare
//   theory_bins.csv, theory_visitation.csv, theory_summary.json  verify-theory
//   gradcheck.csv                 gradcheck

#ifndef GSF_PIPELINE_H_
#define GSF_PIPELINE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "gsf/config.h"

namespace gsf {

namespace paths {
std::string family(const RunConfig& c);
std::string dataset(const RunConfig& c);
std::string gvf(const RunConfig& c);
std::string run_dir(const RunConfig& c, const std::string& method, std::uint64_t seed);
std::string eval_csv(const RunConfig& c);
}  // namespace paths

void write_config_snapshot(const RunConfig& c);

OfflineDataset stage_gen_data(const RunConfig& c);
GvfHeads stage_train_gvf(const RunConfig& c);
// Trains one method/seed against the stored dataset (and GVF for gsf).
AgentRun stage_train_one(const RunConfig& c, const OfflineDataset& ds, const GvfValueTable* values,
                         const std::string& method, std::uint64_t seed);
void stage_train(const RunConfig& c);
std::vector<EvalResult> stage_eval(const RunConfig& c);
Comparison stage_compare(const RunConfig& c);

struct TheoryOutcome {
  BinBoundReport bins;
  VisitationReport visitation;
};
TheoryOutcome stage_verify_theory(const RunConfig& c);

struct GradcheckRow {
  std::string name;
  std::size_t instance = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};
// Throws NumericError after writing gradcheck.csv if any instance fails.
std::vector<GradcheckRow> stage_gradcheck(const RunConfig& c);

// Stage names: gen-data, train-gvf, train, eval, compare, verify-theory,
// gradcheck, pipeline (gen-data through compare). `current` tracks the
// stage that is running, so callers can report where a failure happened.
void run_stage(const RunConfig& c, const std::string& name, std::string* current = nullptr);
const std::vector<std::string>& stage_names();

}  // namespace gsf

#endif  // GSF_PIPELINE_H_
