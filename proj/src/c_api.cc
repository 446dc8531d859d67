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

#include "gsf/gsf.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gsf/config.h"
#include "gsf/error.h"
#include "gsf/pipeline.h"
#include "gsf/quantile.h"

struct gsf_config {
  nlohmann::json doc;
  gsf::RunConfig parsed;
};

struct gsf_dataset {
  gsf::OfflineDataset ds;
};

struct gsf_agent {
  gsf::AgentParams params;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_path;
thread_local std::string g_stage;

gsf_status fail(gsf_status s, const std::string& what, const std::string& path = {}) {
  g_error = what;
  g_path = path;
  return s;
}

// Runs `body`, mapping exceptions onto status codes.
template <class F>
gsf_status guarded(F body) {
  g_error.clear();
  g_path.clear();
  g_stage.clear();
  try {
    body();
    return GSF_OK;
  } catch (const gsf::ConfigError& e) {
    return fail(GSF_ERR_CONFIG, e.what(), e.path());
  } catch (const gsf::ContractError& e) {
    return fail(GSF_ERR_CONTRACT, e.what());
  } catch (const gsf::ShapeError& e) {
    return fail(GSF_ERR_SHAPE, e.what());
  } catch (const gsf::NumericError& e) {
    return fail(GSF_ERR_NUMERIC, e.what());
  } catch (const gsf::IoError& e) {
    return fail(GSF_ERR_IO, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(GSF_ERR_CONFIG, e.what());
  } catch (const std::exception& e) {
    return fail(GSF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GSF_ERR_INTERNAL, "unknown exception");
  }
}

#define GSF_REQUIRE(cond, msg) \
  if (!(cond)) return fail(GSF_ERR_ARGUMENT, msg)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* gsf_version(void) { return "0.1.0"; }

const char* gsf_status_name(gsf_status s) {
  switch (s) {
    case GSF_OK: return "ok";
    case GSF_ERR_ARGUMENT: return "invalid argument";
    case GSF_ERR_CONFIG: return "config error";
    case GSF_ERR_CONTRACT: return "contract violation";
    case GSF_ERR_SHAPE: return "shape error";
    case GSF_ERR_NUMERIC: return "numeric error";
    case GSF_ERR_IO: return "io error";
    case GSF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* gsf_last_error(void) { return g_error.c_str(); }
const char* gsf_last_error_path(void) { return g_path.c_str(); }
const char* gsf_last_error_stage(void) { return g_stage.c_str(); }

void gsf_string_free(char* s) { std::free(s); }

gsf_status gsf_config_new(gsf_config** out) {
  GSF_REQUIRE(out, "out is null");
  return guarded([&] {
    auto* c = new gsf_config{nlohmann::json::object(), gsf::parse_run_config(nlohmann::json::object())};
    *out = c;
  });
}

gsf_status gsf_config_load(const char* path, gsf_config** out) {
  GSF_REQUIRE(path && out, "path or out is null");
  return guarded([&] {
    std::ifstream f(path);
    if (!f) throw gsf::IoError(std::string("cannot open config ") + path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
      throw gsf::ConfigError("", std::string("malformed JSON in ") + path + ": " + e.what());
    }
    gsf::RunConfig parsed = gsf::parse_run_config(doc);
    *out = new gsf_config{std::move(doc), std::move(parsed)};
  });
}

gsf_status gsf_config_parse(const char* json_text, gsf_config** out) {
  GSF_REQUIRE(json_text && out, "json_text or out is null");
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw gsf::ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    gsf::RunConfig parsed = gsf::parse_run_config(doc);
    *out = new gsf_config{std::move(doc), std::move(parsed)};
  });
}

gsf_status gsf_config_set(gsf_config* cfg, const char* key, const char* json_value) {
  GSF_REQUIRE(cfg && key && json_value, "null argument");
  return guarded([&] {
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(json_value);
    } catch (const nlohmann::json::parse_error&) {
      throw gsf::ConfigError(key, std::string("value is not valid JSON: ") + json_value);
    }
    nlohmann::json doc = cfg->doc;
    gsf::apply_override(doc, key, value);
    gsf::RunConfig parsed = gsf::parse_run_config(doc);
    cfg->doc = std::move(doc);
    cfg->parsed = std::move(parsed);
  });
}

namespace {
const nlohmann::json& resolve_key(const nlohmann::json& doc, const std::string& key) {
  const nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(part)) throw gsf::ConfigError(key, "no such key");
    node = &(*node)[part];
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}
}  // namespace

gsf_status gsf_config_get(const gsf_config* cfg, const char* key, char** out) {
  GSF_REQUIRE(cfg && key && out, "null argument");
  return guarded([&] { *out = dup_string(resolve_key(gsf::to_json(cfg->parsed), key).dump()); });
}

gsf_status gsf_config_get_string(const gsf_config* cfg, const char* key, char** out) {
  GSF_REQUIRE(cfg && key && out, "null argument");
  return guarded([&] {
    const nlohmann::json doc = gsf::to_json(cfg->parsed);
    const nlohmann::json& v = resolve_key(doc, key);
    if (!v.is_string()) throw gsf::ConfigError(key, "not a string");
    *out = dup_string(v.get<std::string>());
  });
}

gsf_status gsf_config_to_json(const gsf_config* cfg, char** out) {
  GSF_REQUIRE(cfg && out, "null argument");
  return guarded([&] { *out = dup_string(gsf::to_json(cfg->parsed).dump(2)); });
}

void gsf_config_free(gsf_config* cfg) { delete cfg; }

gsf_status gsf_run_stage(const gsf_config* cfg, const char* stage) {
  GSF_REQUIRE(cfg && stage, "null argument");
  const auto& names = gsf::stage_names();
  GSF_REQUIRE(std::find(names.begin(), names.end(), stage) != names.end(),
              std::string("unknown stage '") + stage + "'");
  std::string current = stage;
  const gsf_status s = guarded([&] { gsf::run_stage(cfg->parsed, stage, &current); });
  if (s != GSF_OK) g_stage = current;
  return s;
}

gsf_status gsf_dataset_generate(const gsf_config* cfg, gsf_dataset** out) {
  GSF_REQUIRE(cfg && out, "null argument");
  return guarded([&] {
    const gsf::RunConfig& c = cfg->parsed;
    const gsf::Family f = gsf::generate_family(c.seed, c.train_levels, c.test_levels, c.family);
    const gsf::TabularQ q = gsf::train_behavior_policy(f.mdp, c.behavior, c.seed);
    *out = new gsf_dataset{gsf::collect(f, q, c.dataset, c.seed)};
  });
}

gsf_status gsf_dataset_load(const char* path, gsf_dataset** out) {
  GSF_REQUIRE(path && out, "null argument");
  return guarded([&] { *out = new gsf_dataset{gsf::load_dataset(path)}; });
}

gsf_status gsf_dataset_save(const gsf_dataset* ds, const char* path) {
  GSF_REQUIRE(ds && path, "null argument");
  return guarded([&] { gsf::save_dataset(path, ds->ds); });
}

gsf_status gsf_dataset_info(const gsf_dataset* ds, size_t* transitions, size_t* obs_dim,
                            size_t* train_levels, size_t* num_actions) {
  GSF_REQUIRE(ds, "dataset is null");
  if (transitions) *transitions = ds->ds.transitions.size();
  if (obs_dim) *obs_dim = ds->ds.obs_dim();
  if (train_levels) *train_levels = ds->ds.family.train.size();
  if (num_actions) *num_actions = ds->ds.family.mdp.action_count;
  return GSF_OK;
}

gsf_status gsf_dataset_observation(const gsf_dataset* ds, size_t level_index, size_t cell,
                                   double* out, size_t out_len) {
  GSF_REQUIRE(ds && out, "null argument");
  GSF_REQUIRE(level_index < ds->ds.family.train.size(), "level index out of range");
  GSF_REQUIRE(cell < ds->ds.family.mdp.num_cells(), "cell out of range");
  GSF_REQUIRE(out_len >= ds->ds.obs_dim(), "output buffer too small");
  return guarded([&] {
    const auto row = ds->ds.obs(ds->ds.family.train[level_index].level_id, cell);
    std::copy(row.begin(), row.end(), out);
  });
}

void gsf_dataset_free(gsf_dataset* ds) { delete ds; }

gsf_status gsf_agent_load(const char* path, gsf_agent** out) {
  GSF_REQUIRE(path && out, "null argument");
  return guarded([&] {
    *out = new gsf_agent{gsf::AgentParams::from_checkpoint(gsf::load_checkpoint(path))};
  });
}

gsf_status gsf_agent_info(const gsf_agent* agent, size_t* obs_dim, size_t* num_actions) {
  GSF_REQUIRE(agent, "agent is null");
  if (obs_dim) *obs_dim = agent->params.obs_dim;
  if (num_actions) *num_actions = agent->params.num_actions;
  return GSF_OK;
}

gsf_status gsf_agent_act(const gsf_agent* agent, const double* obs, size_t rows,
                         size_t* actions) {
  GSF_REQUIRE(agent && obs && actions, "null argument");
  GSF_REQUIRE(rows > 0, "rows must be positive");
  return guarded([&] {
    const std::size_t d = agent->params.obs_dim;
    gsf::Tensor t = gsf::Tensor::matrix(rows, d);
    std::copy(obs, obs + rows * d, t.data().begin());
    const auto a = agent->params.act(t);
    std::copy(a.begin(), a.end(), actions);
  });
}

gsf_status gsf_agent_evaluate(const gsf_config* cfg, const gsf_agent* agent, const gsf_dataset* ds,
                              uint64_t seed, double* train_mean, double* test_mean) {
  GSF_REQUIRE(cfg && agent && ds, "null argument");
  return guarded([&] {
    const gsf::EvalResult r = gsf::evaluate(agent->params, ds->ds.family, cfg->parsed.eval, seed, "agent");
    const auto has = [&](gsf::Split s) {
      const auto& sp = cfg->parsed.eval.splits;
      return std::find(sp.begin(), sp.end(), s) != sp.end();
    };
    if (train_mean) *train_mean = has(gsf::Split::kTrain) ? r.mean(gsf::Split::kTrain) : 0.0;
    if (test_mean) *test_mean = has(gsf::Split::kTest) ? r.mean(gsf::Split::kTest) : 0.0;
  });
}

void gsf_agent_free(gsf_agent* agent) { delete agent; }

gsf_status gsf_assign_labels(const int* level_of, const double* values, size_t n, size_t K,
                             int* labels) {
  GSF_REQUIRE(level_of && values && labels, "null argument");
  GSF_REQUIRE(K >= 1, "K must be >= 1");
  return guarded([&] {
    const gsf::BinLabeling lab =
        gsf::assign_labels(std::span<const int>(level_of, n), std::span<const double>(values, n), K);
    std::copy(lab.labels.begin(), lab.labels.end(), labels);
  });
}

gsf_status gsf_estimate_p(size_t n, size_t K, double eps, const char* dist, size_t trials,
                          uint64_t seed, double* out) {
  GSF_REQUIRE(dist && out, "null argument");
  return guarded([&] {
    gsf::Rng rng = gsf::make_rng(seed, gsf::streams::kTheory);
    *out = gsf::estimate_p(n, K, eps, gsf::parse_value_distribution(dist), trials, rng);
  });
}

}  // extern "C"
