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

// gsf: command-line front end over the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsf/gsf.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::optional<unsigned long long> seed;
  std::optional<std::string> out;
  std::optional<unsigned long long> threads;
  std::optional<std::string> cumulant;
  std::optional<std::string> loss;
  std::optional<unsigned long long> k;
  std::optional<double> tau;
  std::optional<double> lambda;
  std::optional<std::string> method;
  std::vector<std::string> sets;
};

std::string quoted(const std::string& s) {
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') q += '\\';
    q += ch;
  }
  return q + "\"";
}

int config_failure() {
  // the message already starts with the offending key path
  std::fprintf(stderr, "config error: %s\n", gsf_last_error());
  return kExitConfig;
}

int report(gsf_status s) {
  if (s == GSF_ERR_CONFIG) return config_failure();
  const std::string stage = gsf_last_error_stage();
  std::fprintf(stderr, "%s%s%s: %s\n", stage.empty() ? "" : "stage ", stage.c_str(),
               stage.empty() ? gsf_status_name(s) : " failed", gsf_last_error());
  return kExitRuntime;
}

void print_file(const std::string& path) {
  std::ifstream f(path);
  if (f) std::cout << f.rdbuf();
}

int run(const std::string& stage, const Options& o) {
  gsf_config* cfg = nullptr;
  gsf_status s = o.config.empty() ? gsf_config_new(&cfg) : gsf_config_load(o.config.c_str(), &cfg);
  if (s != GSF_OK) return report(s);

  std::vector<std::pair<std::string, std::string>> overrides;
  if (o.seed) overrides.emplace_back("seed", std::to_string(*o.seed));
  if (o.out) overrides.emplace_back("out", quoted(*o.out));
  if (o.threads) overrides.emplace_back("threads", std::to_string(*o.threads));
  if (o.cumulant) overrides.emplace_back("gvf.cumulant", quoted(*o.cumulant));
  if (o.loss) overrides.emplace_back("agent.loss", quoted(*o.loss));
  if (o.k) overrides.emplace_back("agent.K", std::to_string(*o.k));
  if (o.tau) overrides.emplace_back("agent.tau", std::to_string(*o.tau));
  if (o.lambda) overrides.emplace_back("agent.lambda", std::to_string(*o.lambda));
  if (o.method) overrides.emplace_back("experiment.methods", "[" + quoted(*o.method) + "]");
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "config error: --set expects key=value, got '%s'\n", kv.c_str());
      gsf_config_free(cfg);
      return kExitConfig;
    }
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [key, value] : overrides) {
    s = gsf_config_set(cfg, key.c_str(), value.c_str());
    if (s != GSF_OK) {
      gsf_config_free(cfg);
      return report(s);
    }
  }

  std::string out_dir;
  char* od = nullptr;
  if (gsf_config_get_string(cfg, "out", &od) == GSF_OK) {
    out_dir = od;
    gsf_string_free(od);
  }

  s = gsf_run_stage(cfg, stage.c_str());
  gsf_config_free(cfg);
  if (s != GSF_OK) return report(s);

  if (stage == "compare" || stage == "pipeline") print_file(out_dir + "/comparison.txt");
  if (stage == "verify-theory") print_file(out_dir + "/theory_summary.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GSF lab: offline RL with quantile-binned GVF contrastive labels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gsf_version()));

  Options o;
  app.add_option("--config", o.config, "JSON run config (all keys optional)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed (family, dataset, GVF)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--threads", o.threads, "worker threads for independent GVF heads");
  app.add_option("--cumulant", o.cumulant, "reward | sf | action");
  app.add_option("--loss", o.loss, "cce | pairwise");
  app.add_option("--k", o.k, "number of quantile bins K");
  app.add_option("--tau", o.tau, "contrastive temperature");
  app.add_option("--lambda", o.lambda, "CQL regularizer weight");
  app.add_option("--method", o.method, "train/eval a single method: gsf | cql | bc");
  app.add_option("--set", o.sets, "override any key, e.g. --set agent.epochs=3 (value is JSON)");

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"gen-data", "generate the level family and the offline dataset"},
      {"train-gvf", "fit per-level GVFs on the dataset"},
      {"train", "train every configured method and seed"},
      {"eval", "zero-shot evaluation of trained agents"},
      {"compare", "baseline-normalized comparison table"},
      {"verify-theory", "Monte-Carlo and exact checks of the labeling results"},
      {"gradcheck", "finite-difference checks of every op and loss"},
      {"pipeline", "gen-data, train-gvf, train, eval and compare"}};
  for (const auto& [name, help] : stages) {
    app.add_subcommand(name, help)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  return run(app.get_subcommands().front()->get_name(), o);
}
