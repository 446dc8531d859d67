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

#include "gsf/evalbench.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "gsf/error.h"
#include "gsf/log.h"

namespace gsf {

std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ConfigError("", "unknown split '" + s + "' (expected train or test)");
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile_of(std::vector<double> v, double q) {
  if (v.empty()) throw ContractError("percentile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

std::vector<double> split_returns(const EvalResult& r, Split s) {
  std::vector<double> v;
  for (const auto& l : r.levels) {
    if (l.split == s) v.push_back(l.mean_return);
  }
  return v;
}

}  // namespace

double EvalResult::mean(Split s) const {
  const auto v = split_returns(*this, s);
  if (v.empty()) return std::nan("");
  double t = 0.0;
  for (double x : v) t += x;
  return t / static_cast<double>(v.size());
}

double EvalResult::median(Split s) const {
  const auto v = split_returns(*this, s);
  return v.empty() ? std::nan("") : median_of(v);
}

EvalResult evaluate_policy(const StepPolicy& policy, const Family& family,
                           const EvalConfig& config, std::uint64_t seed,
                           const std::string& method) {
  if (config.episodes_per_level < 1) throw ConfigError("eval.episodes_per_level", "must be >= 1");
  const LatentMdp& mdp = family.mdp;
  const std::size_t T = config.max_steps > 0 ? config.max_steps : mdp.max_steps;
  const std::uint64_t base = derive_seed(seed, streams::kEval);
  EvalResult out;
  out.method = method;
  out.seed = seed;
  for (Split split : config.splits) {
    const auto& levels = split == Split::kTrain ? family.train : family.test;
    if (levels.empty()) throw ContractError("no " + to_string(split) + " levels to evaluate");
    for (const auto& level : levels) {
      Rng rng(derive_seed(base, static_cast<std::uint64_t>(level.level_id)));
      const std::size_t n = mdp.start_cells.size();
      const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      double total = 0.0;
      for (std::size_t e = 0; e < config.episodes_per_level; ++e) {
        std::size_t s = mdp.start_cells[(offset + e) % n];
        for (std::size_t t = 0; t < T; ++t) {
          const StepResult r = step(mdp, s, policy(level, s, rng));
          total += r.reward;
          s = r.next;
          if (r.done) break;
        }
      }
      out.levels.push_back({split, level.level_id,
                            total / static_cast<double>(config.episodes_per_level),
                            config.episodes_per_level});
    }
  }
  return out;
}

EvalResult evaluate(const AgentParams& params, const Family& family, const EvalConfig& config,
                    std::uint64_t seed, const std::string& method) {
  if (params.obs_dim != family.obs_dim() || params.num_actions != family.mdp.action_count) {
    throw ShapeError("agent expects obs_dim " + std::to_string(params.obs_dim) + " and " +
                     std::to_string(params.num_actions) + " actions; family has " +
                     std::to_string(family.obs_dim()) + " and " +
                     std::to_string(family.mdp.action_count));
  }
  const std::size_t cells = family.mdp.num_cells(), D = family.obs_dim();
  std::map<int, std::vector<std::size_t>> table;
  auto fill = [&](const std::vector<LevelSpec>& levels) {
    for (const auto& level : levels) {
      Tensor obs = Tensor::matrix(cells, D);
      for (std::size_t c = 0; c < cells; ++c) {
        observe_into(family.mdp, level, c, obs.data().subspan(c * D, D));
      }
      table[level.level_id] = params.act(obs);
    }
  };
  for (Split s : config.splits) fill(s == Split::kTrain ? family.train : family.test);
  const StepPolicy greedy = [&table](const LevelSpec& level, std::size_t state, Rng&) {
    return table.at(level.level_id)[state];
  };
  return evaluate_policy(greedy, family, config, seed, method);
}

StepPolicy oracle_policy(const LatentMdp& mdp) {
  const auto dist = distances_to_goal(mdp);
  return [mdp, dist](const LevelSpec&, std::size_t s, Rng&) {
    for (std::size_t a = 0; a < mdp.action_count; ++a) {
      const StepResult r = step(mdp, s, a);
      if (dist[r.next] >= 0 && dist[r.next] == dist[s] - 1) return a;
    }
    return std::size_t{0};
  };
}

StepPolicy random_policy(std::size_t num_actions) {
  return [num_actions](const LevelSpec&, std::size_t, Rng& rng) {
    return std::uniform_int_distribution<std::size_t>(0, num_actions - 1)(rng);
  };
}

void write_eval_csv(const std::string& path, const std::vector<EvalResult>& results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "method,seed,split,level_id,mean_return\n";
  for (const auto& r : results) {
    for (const auto& l : r.levels) {
      out << fmt::format("{},{},{},{},{}\n", r.method, r.seed, to_string(l.split), l.level_id,
                         l.mean_return);
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<EvalResult> read_eval_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "method,seed,split,level_id,mean_return") {
    throw IoError(path + ": expected header method,seed,split,level_id,mean_return");
  }
  std::vector<EvalResult> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw IoError(fmt::format("{}:{}: expected 5 fields", path, lineno));
    try {
      const std::uint64_t seed = std::stoull(f[1]);
      auto it = std::find_if(out.begin(), out.end(), [&](const EvalResult& r) {
        return r.method == f[0] && r.seed == seed;
      });
      if (it == out.end()) {
        out.push_back({f[0], seed, {}});
        it = out.end() - 1;
      }
      it->levels.push_back({parse_split(f[2]), std::stoi(f[3]), std::stod(f[4]), 0});
    } catch (const std::logic_error& e) {
      throw IoError(fmt::format("{}:{}: {}", path, lineno, e.what()));
    } catch (const ConfigError& e) {
      throw IoError(fmt::format("{}:{}: {}", path, lineno, e.what()));
    }
  }
  return out;
}

Comparison compare(const std::vector<EvalResult>& results, const std::string& baseline) {
  Comparison c;
  c.baseline = baseline;
  std::vector<std::string> methods;
  std::set<std::uint64_t> all_seeds;
  std::set<Split> splits;
  for (const auto& r : results) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    all_seeds.insert(r.seed);
    for (const auto& l : r.levels) splits.insert(l.split);
  }
  if (std::find(methods.begin(), methods.end(), baseline) == methods.end()) {
    throw ContractError("baseline '" + baseline + "' has no results");
  }
  auto per_seed = [&](const std::string& method, Split s) {
    std::map<std::uint64_t, double> m;
    for (const auto& r : results) {
      if (r.method == method && !split_returns(r, s).empty()) m[r.seed] = r.mean(s);
    }
    return m;
  };
  std::map<Split, double> base_median;
  for (Split s : splits) {
    std::vector<double> v;
    for (const auto& [seed, x] : per_seed(baseline, s)) v.push_back(x);
    if (v.empty()) throw ContractError("baseline '" + baseline + "' has no " + to_string(s) + " results");
    base_median[s] = median_of(v);
    if (base_median[s] == 0.0) {
      c.normalized = false;
      logger().warn("baseline '{}' has median {} return 0; reporting unnormalized returns",
                    baseline, to_string(s));
    }
  }
  c.baseline_median_train = base_median.count(Split::kTrain) ? base_median[Split::kTrain] : std::nan("");
  c.baseline_median_test = base_median.count(Split::kTest) ? base_median[Split::kTest] : std::nan("");
  for (const auto& method : methods) {
    for (Split s : splits) {
      ComparisonRow row;
      row.method = method;
      row.split = s;
      const auto m = per_seed(method, s);
      std::vector<double> returns, scores;
      for (std::uint64_t seed : all_seeds) {
        const auto it = m.find(seed);
        if (it == m.end()) {
          row.missing.push_back(seed);
          continue;
        }
        row.seeds.push_back(seed);
        returns.push_back(it->second);
        scores.push_back(c.normalized ? it->second / base_median[s] - 1.0 : it->second);
      }
      if (returns.empty()) {
        row.median_return = row.median_score = row.q25_score = row.q75_score = std::nan("");
      } else {
        row.median_return = median_of(returns);
        row.median_score = median_of(scores);
        row.q25_score = percentile_of(scores, 0.25);
        row.q75_score = percentile_of(scores, 0.75);
      }
      c.rows.push_back(row);
    }
  }
  return c;
}

namespace {

std::string seed_list(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

std::string num(double x) { return std::isnan(x) ? "NA" : fmt::format("{:.4f}", x); }

}  // namespace

std::string Comparison::table() const {
  std::string out = fmt::format("baseline {} ({}), median return train {} test {}\n", baseline,
                                normalized ? "score = return / baseline median - 1"
                                           : "unnormalized, baseline median is 0",
                                num(baseline_median_train), num(baseline_median_test));
  out += fmt::format("{:<10} {:<6} {:>6} {:>10} {:>10} {:>10} {:>10}  {}\n", "method", "split",
                     "seeds", "med_ret", "med_score", "q25", "q75", "missing");
  for (const auto& r : rows) {
    out += fmt::format("{:<10} {:<6} {:>6} {:>10} {:>10} {:>10} {:>10}  {}\n", r.method,
                       to_string(r.split), r.seeds.size(), num(r.median_return),
                       num(r.median_score), num(r.q25_score), num(r.q75_score),
                       r.missing.empty() ? "-" : "NA seeds " + seed_list(r.missing));
  }
  return out;
}

void Comparison::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "method,split,n_seeds,missing_seeds,median_return,median_score,q25_score,q75_score,"
         "normalized\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.method, to_string(r.split),
                       r.seeds.size(), seed_list(r.missing), r.median_return, r.median_score,
                       r.q25_score, r.q75_score, normalized ? 1 : 0);
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace gsf
