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

#include "gsf/pipeline.h"

#include <filesystem>
#include <fstream>

#include <spdlog/fmt/fmt.h>

#include "gsf/checkpoint.h"
#include "gsf/error.h"
#include "gsf/gradcheck.h"
#include "gsf/log.h"

namespace gsf {

namespace fs = std::filesystem;

namespace paths {
std::string family(const RunConfig& c) { return (fs::path(c.out) / "family.json").string(); }
std::string dataset(const RunConfig& c) { return (fs::path(c.out) / "dataset.bin").string(); }
std::string gvf(const RunConfig& c) {
  return (fs::path(c.out) / ("gvf_" + to_string(c.cumulant) + ".ckpt")).string();
}
std::string run_dir(const RunConfig& c, const std::string& method, std::uint64_t seed) {
  return (fs::path(c.out) / method / ("seed_" + std::to_string(seed))).string();
}
std::string eval_csv(const RunConfig& c) { return (fs::path(c.out) / "eval.csv").string(); }
}  // namespace paths

namespace {

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f << text;
  if (!f) throw IoError("write failed: " + p.string());
}

OfflineDataset require_dataset(const RunConfig& c) {
  const std::string p = paths::dataset(c);
  if (!fs::exists(p)) throw IoError(p + " not found; run gen-data first");
  return load_dataset(p);
}

GvfHeads require_gvf(const RunConfig& c) {
  const std::string p = paths::gvf(c);
  if (!fs::exists(p)) throw IoError(p + " not found; run train-gvf first");
  return GvfHeads::from_checkpoint(load_checkpoint(p));
}

bool needs_gvf(const RunConfig& c) {
  for (const auto& m : c.experiment.methods) {
    if (m == "gsf") return true;
  }
  return false;
}

}  // namespace

void write_config_snapshot(const RunConfig& c) {
  ensure_dir(c.out);
  write_text(fs::path(c.out) / "resolved_config.json", to_json(c).dump(2) + "\n");
}

OfflineDataset stage_gen_data(const RunConfig& c) {
  StageTimer timer("gen-data");
  ensure_dir(c.out);
  const Family family = generate_family(c.seed, c.train_levels, c.test_levels, c.family);
  const TabularQ behavior = train_behavior_policy(family.mdp, c.behavior, c.seed);
  OfflineDataset ds = collect(family, behavior, c.dataset, c.seed);
  save_family(paths::family(c), family);
  save_dataset(paths::dataset(c), ds);
  logger().info("gen-data: {} transitions over {} levels", ds.transitions.size(),
                family.train.size());
  return ds;
}

GvfHeads stage_train_gvf(const RunConfig& c) {
  const OfflineDataset ds = require_dataset(c);
  CumulantSpec spec =
      make_cumulant(c.cumulant, ds.obs_dim(), ds.family.mdp.action_count, c.sf_dim, c.seed);
  const GvfSamples samples = make_gvf_samples(ds, spec);
  GvfHeads heads = learn_all_gvfs(samples, spec, c.gvf, c.seed);
  save_checkpoint(paths::gvf(c), heads.to_checkpoint());
  return heads;
}

AgentRun stage_train_one(const RunConfig& c, const OfflineDataset& ds, const GvfValueTable* values,
                         const std::string& method, std::uint64_t seed) {
  const fs::path dir = paths::run_dir(c, method, seed);
  ensure_dir(dir);
  AgentConfig ac = c.agent;
  ac.abort_checkpoint = (dir / "abort.ckpt").string();
  EvalFn eval;
  if (c.experiment.eval_each_epoch) {
    eval = [&](const AgentParams& p, std::size_t) {
      const EvalResult r = evaluate(p, ds.family, c.eval, seed, method);
      return std::make_pair(r.mean(Split::kTrain), r.mean(Split::kTest));
    };
  }
  AgentRun run;
  if (method == "gsf") {
    if (!values) throw ContractError("gsf training needs GVF values");
    run = train_gsf(ds, values, ac, seed, eval);
  } else if (method == "cql") {
    run = train_cql(ds, ac, seed, eval);
  } else if (method == "bc") {
    run = train_bc(ds, ac, seed, eval);
  } else {
    throw ConfigError("experiment.methods", "unknown method '" + method + "'");
  }
  save_checkpoint((dir / "agent.ckpt").string(), run.params.to_checkpoint());
  write_metrics_csv((dir / "metrics.csv").string(), run.metrics);
  write_diagnostics_csv((dir / "diagnostics.csv").string(), run.metrics);
  return run;
}

void stage_train(const RunConfig& c) {
  const OfflineDataset ds = require_dataset(c);
  GvfValueTable values;
  if (needs_gvf(c)) values = gvf_value_table(require_gvf(c), ds);
  for (const auto& method : c.experiment.methods) {
    for (std::uint64_t seed : c.experiment.seeds) {
      StageTimer timer(fmt::format("train {} seed {}", method, seed));
      stage_train_one(c, ds, method == "gsf" ? &values : nullptr, method, seed);
    }
  }
}

std::vector<EvalResult> stage_eval(const RunConfig& c) {
  StageTimer timer("eval");
  const Family family = load_family(paths::family(c));
  std::vector<EvalResult> all;
  for (const auto& method : c.experiment.methods) {
    for (std::uint64_t seed : c.experiment.seeds) {
      const fs::path ckpt = fs::path(paths::run_dir(c, method, seed)) / "agent.ckpt";
      if (!fs::exists(ckpt)) {
        logger().warn("eval: {} missing, skipped", ckpt.string());
        continue;
      }
      const AgentParams p = AgentParams::from_checkpoint(load_checkpoint(ckpt.string()));
      all.push_back(evaluate(p, family, c.eval, seed, method));
    }
  }
  if (all.empty()) throw IoError("eval: no trained agents under " + c.out + "; run train first");
  write_eval_csv(paths::eval_csv(c), all);
  return all;
}

Comparison stage_compare(const RunConfig& c) {
  const std::string p = paths::eval_csv(c);
  if (!fs::exists(p)) throw IoError(p + " not found; run eval first");
  const Comparison cmp = compare(read_eval_csv(p), c.experiment.baseline);
  cmp.write_csv((fs::path(c.out) / "comparison.csv").string());
  write_text(fs::path(c.out) / "comparison.txt", cmp.table());
  return cmp;
}

TheoryOutcome stage_verify_theory(const RunConfig& c) {
  StageTimer timer("verify-theory");
  ensure_dir(c.out);
  TheoryOutcome o;
  o.bins = verify_bin_bound(c.theory.bin_bound, c.seed);
  OfflineDataset ds;
  if (fs::exists(paths::dataset(c))) {
    ds = load_dataset(paths::dataset(c));
  } else {
    const Family family = generate_family(c.seed, c.train_levels, c.test_levels, c.family);
    ds = collect(family, train_behavior_policy(family.mdp, c.behavior, c.seed), c.dataset, c.seed);
  }
  o.visitation = verify_visitation(ds, nullptr, c.theory.visitation_K, ds.family.mdp.gamma, c.seed,
                             c.theory.reset_at_goal);
  write_bin_bound_csv((fs::path(c.out) / "theory_bins.csv").string(), o.bins);
  write_visitation_csv((fs::path(c.out) / "theory_visitation.csv").string(), o.visitation);
  write_text(fs::path(c.out) / "theory_summary.json",
             theory_summary_json(o.bins, o.visitation) + "\n");
  return o;
}

std::vector<GradcheckRow> stage_gradcheck(const RunConfig& c) {
  StageTimer timer("gradcheck");
  ensure_dir(c.out);
  std::vector<GradCaseFactory> all = op_grad_cases();
  for (const auto& f : loss_gradient_cases()) all.push_back(f);
  std::vector<GradcheckRow> rows;
  std::size_t failed = 0;
  for (std::size_t fi = 0; fi < all.size(); ++fi) {
    Rng rng(derive_seed(derive_seed(c.seed, streams::kGradcheck), fi));
    for (std::size_t i = 0; i < c.gradcheck.instances; ++i) {
      auto gc = all[fi].make(rng);
      const auto params = gc->params();
      const GradCheckReport r = gradient_check(gc->loss, params, c.gradcheck.h, c.gradcheck.tol);
      rows.push_back({all[fi].name, i, r.max_rel_error, r.passed});
      if (!r.passed) ++failed;
    }
  }
  std::string csv = "name,instance,max_rel_error,passed\n";
  for (const auto& r : rows) {
    csv += fmt::format("{},{},{},{}\n", r.name, r.instance, r.max_rel_error, r.passed ? 1 : 0);
  }
  write_text(fs::path(c.out) / "gradcheck.csv", csv);
  if (failed) throw NumericError(fmt::format("{} gradient check instances failed", failed));
  return rows;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> n = {"gen-data", "train-gvf",     "train",     "eval",
                                             "compare",  "verify-theory", "gradcheck", "pipeline"};
  return n;
}

void run_stage(const RunConfig& c, const std::string& name, std::string* current) {
  auto enter = [&](const std::string& s) {
    if (current) *current = s;
  };
  enter(name);
  write_config_snapshot(c);
  if (name == "gen-data") {
    stage_gen_data(c);
  } else if (name == "train-gvf") {
    stage_train_gvf(c);
  } else if (name == "train") {
    stage_train(c);
  } else if (name == "eval") {
    stage_eval(c);
  } else if (name == "compare") {
    stage_compare(c);
  } else if (name == "verify-theory") {
    stage_verify_theory(c);
  } else if (name == "gradcheck") {
    stage_gradcheck(c);
  } else if (name == "pipeline") {
    StageTimer timer("pipeline");
    enter("gen-data");
    stage_gen_data(c);
    if (needs_gvf(c)) {
      enter("train-gvf");
      stage_train_gvf(c);
    }
    enter("train");
    stage_train(c);
    enter("eval");
    stage_eval(c);
    enter("compare");
    stage_compare(c);
  } else {
    throw ContractError("unknown stage '" + name + "'");
  }
}

}  // namespace gsf
