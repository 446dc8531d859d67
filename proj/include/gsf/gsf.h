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

/* C interface to the GSF library.
 *
 * Objects are opaque handles created by *_new / *_load / *_generate and
 * released with the matching *_free. Every fallible call returns a
 * gsf_status; on failure gsf_last_error() describes the problem for the
 * calling thread until its next failing call. Strings returned through
 * char** are owned by the caller and released with gsf_string_free. */

#ifndef GSF_GSF_H_
#define GSF_GSF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GSF_API __declspec(dllexport)
#else
#define GSF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gsf_status {
  GSF_OK = 0,
  GSF_ERR_ARGUMENT = 1, /* null handle, bad name, out-of-range index */
  GSF_ERR_CONFIG = 2,   /* gsf_last_error_path() names the field */
  GSF_ERR_CONTRACT = 3,
  GSF_ERR_SHAPE = 4,
  GSF_ERR_NUMERIC = 5,
  GSF_ERR_IO = 6,
  GSF_ERR_INTERNAL = 7
} gsf_status;

typedef struct gsf_config gsf_config;
typedef struct gsf_dataset gsf_dataset;
typedef struct gsf_agent gsf_agent;

GSF_API const char* gsf_version(void);
GSF_API const char* gsf_status_name(gsf_status s);

/* Last failure on this thread; empty strings when there is none. */
GSF_API const char* gsf_last_error(void);
GSF_API const char* gsf_last_error_path(void);  /* dotted config key */
GSF_API const char* gsf_last_error_stage(void); /* pipeline stage */

GSF_API void gsf_string_free(char* s);

/* Configuration: a JSON document, all keys optional, unknown keys rejected. */
GSF_API gsf_status gsf_config_new(gsf_config** out);
GSF_API gsf_status gsf_config_load(const char* path, gsf_config** out);
GSF_API gsf_status gsf_config_parse(const char* json_text, gsf_config** out);
/* Sets a dotted key (e.g. "agent.tau") to a JSON value (e.g. "0.3" or
 * "\"pairwise\""). The config is left unchanged if the result is invalid. */
GSF_API gsf_status gsf_config_set(gsf_config* cfg, const char* key, const char* json_value);
/* Resolved value at a dotted key as JSON text. */
GSF_API gsf_status gsf_config_get(const gsf_config* cfg, const char* key, char** out);
/* Same for a string-valued key, without JSON quoting. */
GSF_API gsf_status gsf_config_get_string(const gsf_config* cfg, const char* key, char** out);
/* Fully resolved document, defaults included. */
GSF_API gsf_status gsf_config_to_json(const gsf_config* cfg, char** out);
GSF_API void gsf_config_free(gsf_config* cfg);

/* Runs one stage: gen-data, train-gvf, train, eval, compare, verify-theory,
 * gradcheck or pipeline. Artifacts go to the config's output directory. */
GSF_API gsf_status gsf_run_stage(const gsf_config* cfg, const char* stage);

/* Offline datasets. */
GSF_API gsf_status gsf_dataset_generate(const gsf_config* cfg, gsf_dataset** out);
GSF_API gsf_status gsf_dataset_load(const char* path, gsf_dataset** out);
GSF_API gsf_status gsf_dataset_save(const gsf_dataset* ds, const char* path);
GSF_API gsf_status gsf_dataset_info(const gsf_dataset* ds, size_t* transitions, size_t* obs_dim,
                                    size_t* train_levels, size_t* num_actions);
/* Observation row of (train level index, latent cell), obs_dim doubles. */
GSF_API gsf_status gsf_dataset_observation(const gsf_dataset* ds, size_t level_index,
                                           size_t cell, double* out, size_t out_len);
GSF_API void gsf_dataset_free(gsf_dataset* ds);

/* Trained agents. */
GSF_API gsf_status gsf_agent_load(const char* path, gsf_agent** out);
GSF_API gsf_status gsf_agent_info(const gsf_agent* agent, size_t* obs_dim, size_t* num_actions);
/* Greedy actions for `rows` observations stored row-major. */
GSF_API gsf_status gsf_agent_act(const gsf_agent* agent, const double* obs, size_t rows,
                                 size_t* actions);
/* Mean return over the dataset family's train and test levels. */
GSF_API gsf_status gsf_agent_evaluate(const gsf_config* cfg, const gsf_agent* agent,
                                      const gsf_dataset* ds, uint64_t seed, double* train_mean,
                                      double* test_mean);
GSF_API void gsf_agent_free(gsf_agent* agent);

/* Quantile labels 1..K of each value against its own level's quantiles. */
GSF_API gsf_status gsf_assign_labels(const int* level_of, const double* values, size_t n,
                                     size_t K, int* labels);
/* Monte-Carlo adjacent-quantile-gap probability; dist is "uniform",
 * "gaussian" or "point_mass_mixture". */
GSF_API gsf_status gsf_estimate_p(size_t n, size_t K, double eps, const char* dist,
                                  size_t trials, uint64_t seed, double* out);

#ifdef __cplusplus
}
#endif

#endif /* GSF_GSF_H_ */
