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

#include "gsf/theory.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/fmt/fmt.h>

#include "gsf/error.h"
#include "gsf/log.h"
#include "gsf/quantile.h"

namespace gsf {

ValueDistribution parse_value_distribution(const std::string& s) {
  if (s == "uniform") return ValueDistribution::kUniform;
  if (s == "gaussian") return ValueDistribution::kGaussian;
  if (s == "point_mass_mixture") return ValueDistribution::kPointMassMixture;
  throw ConfigError("", "unknown value distribution '" + s +
                            "' (expected uniform, gaussian or point_mass_mixture)");
}

std::string to_string(ValueDistribution d) {
  switch (d) {
    case ValueDistribution::kUniform: return "uniform";
    case ValueDistribution::kGaussian: return "gaussian";
    case ValueDistribution::kPointMassMixture: return "point_mass_mixture";
  }
  return "?";
}

double draw_value(ValueDistribution d, Rng& rng) {
  switch (d) {
    case ValueDistribution::kUniform:
      return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    case ValueDistribution::kGaussian:
      return std::normal_distribution<double>(0.0, 1.0)(rng);
    case ValueDistribution::kPointMassMixture: {
      // atoms 0, 0.5, 1 with weights .5, .3, .2
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      return u < 0.5 ? 0.0 : (u < 0.8 ? 0.5 : 1.0);
    }
  }
  return 0.0;
}

namespace {

// Quantile of an already sorted sample under the <= CDF.
double sorted_quantile(const std::vector<double>& s, double p) {
  const double n = static_cast<double>(s.size());
  if (p <= 0.0) return s.front();
  std::size_t j = static_cast<std::size_t>(std::ceil(p * n - 1e-12));
  j = std::clamp<std::size_t>(j, 1, s.size());
  return s[j - 1];
}

double max_adjacent_gap(const std::vector<double>& sorted, std::size_t K) {
  double prev = sorted_quantile(sorted, 0.0), gap = 0.0;
  for (std::size_t k = 1; k <= K; ++k) {
    const double b = sorted_quantile(sorted, static_cast<double>(k) / static_cast<double>(K));
    gap = std::max(gap, b - prev);
    prev = b;
  }
  return gap;
}

void draw_sorted(std::vector<double>& out, std::size_t n, ValueDistribution d, Rng& rng) {
  out.resize(n);
  for (double& v : out) v = draw_value(d, rng);
  std::sort(out.begin(), out.end());
}

double binomial_se(double f, std::size_t trials) {
  return std::sqrt(std::max(0.0, f * (1.0 - f)) / static_cast<double>(trials));
}

}  // namespace

double estimate_p(std::size_t n, std::size_t K, double eps, ValueDistribution dist,
                  std::size_t trials, Rng& rng) {
  if (n == 0 || K == 0 || trials == 0) throw ContractError("estimate_p needs n, K, trials >= 1");
  std::vector<double> s;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    draw_sorted(s, n, dist, rng);
    if (max_adjacent_gap(s, K) > eps) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

double dkw_term(std::size_t n, double eps) {
  return 2.0 * std::exp(-2.0 * static_cast<double>(n) * eps * eps / 4.0);
}

BinBoundReport verify_bin_bound(const BinBoundConfig& c, std::uint64_t seed) {
  if (c.trials == 0) throw ConfigError("theory.trials", "must be >= 1");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw ConfigError("theory.gamma", "must be in (0, 1)");
  if (c.bad_gap <= 1.0) throw ConfigError("theory.bad_gap", "must exceed 1");
  if (c.n2_ratio <= 0.0) throw ConfigError("theory.n2_ratio", "must be positive");
  for (double d : c.delta) {
    if (d < 0.0 || d > 1.0) throw ConfigError("theory.delta", "entries must lie in [0, 1]");
  }
  for (double e : c.eps) {
    if (e <= 0.0) throw ConfigError("theory.eps", "entries must be positive");
  }
  for (std::size_t k : c.K) {
    if (k == 0) throw ConfigError("theory.K", "entries must be >= 1");
  }

  BinBoundReport report;
  const double cum_scale = (1.0 - c.gamma) / c.gamma;  // cumulant gap per unit of eps
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution bern(0.0);

  for (std::size_t di = 0; di < c.distributions.size(); ++di) {
    const ValueDistribution dist = c.distributions[di];
    for (std::size_t xi = 0; xi < c.delta.size(); ++xi) {
      const double delta = c.delta[xi];
      for (std::size_t ni = 0; ni < c.n.size(); ++ni) {
        const std::size_t n1 = c.n[ni];
        const std::size_t n2 =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(n1 * c.n2_ratio)));
        const std::size_t nmin = std::min(n1, n2);
        for (std::size_t k : c.K) {
          if (k > nmin) throw ConfigError("theory.K", fmt::format("K={} exceeds n={}", k, nmin));
        }
        Rng rng(derive_seed(derive_seed(seed, streams::kTheory), di * 10007 + xi * 101 + ni));
        Rng prng(derive_seed(derive_seed(seed, streams::kTheory), 1000003 + di * 10007 + xi * 101 + ni));
        bern = std::bernoulli_distribution(delta);

        const std::size_t nk = c.K.size(), ne = c.eps.size();
        // hits[(ki * ne + ei) * K + k]
        std::vector<std::vector<std::size_t>> hits(nk * ne);
        std::vector<std::size_t> any(nk * ne, 0), phits(nk * ne, 0);
        for (std::size_t ki = 0; ki < nk; ++ki) {
          for (std::size_t ei = 0; ei < ne; ++ei) hits[ki * ne + ei].assign(c.K[ki], 0);
        }

        std::vector<double> g1, latent(n2), w(n2), g2(n2), pz;
        std::vector<double> lo1, hi1, lo2, hi2;
        for (std::size_t t = 0; t < c.trials; ++t) {
          draw_sorted(g1, n1, dist, rng);
          for (std::size_t j = 0; j < n2; ++j) {
            latent[j] = draw_value(dist, rng);
            w[j] = unit(rng);
          }
          const bool bad = bern(rng);
          draw_sorted(pz, nmin, dist, prng);

          for (std::size_t ei = 0; ei < ne; ++ei) {
            const double eps = c.eps[ei];
            // Per-state cumulant gap held constant over time, so the GVF gap
            // is the cumulant gap times gamma / (1 - gamma).
            for (std::size_t j = 0; j < n2; ++j) {
              const double cgap = (bad ? c.bad_gap : w[j]) * cum_scale * eps;
              g2[j] = latent[j] + cgap / cum_scale;
            }
            std::sort(g2.begin(), g2.end());
            for (std::size_t ki = 0; ki < nk; ++ki) {
              const std::size_t K = c.K[ki];
              const std::size_t slot = ki * ne + ei;
              if (max_adjacent_gap(pz, K) > eps) ++phits[slot];

              std::vector<double> b1(K + 1), b2(K + 1);
              for (std::size_t k = 0; k <= K; ++k) {
                const double p = static_cast<double>(k) / static_cast<double>(K);
                b1[k] = sorted_quantile(g1, p);
                b2[k] = sorted_quantile(g2, p);
              }
              constexpr double inf = std::numeric_limits<double>::infinity();
              lo1.assign(K, inf);
              hi1.assign(K, -inf);
              lo2.assign(K, inf);
              hi2.assign(K, -inf);
              for (double v : g1) {
                const std::size_t k = static_cast<std::size_t>(bin_label(b1, v)) - 1;
                lo1[k] = std::min(lo1[k], v);
                hi1[k] = std::max(hi1[k], v);
              }
              for (double v : g2) {
                const std::size_t k = static_cast<std::size_t>(bin_label(b2, v)) - 1;
                lo2[k] = std::min(lo2[k], v);
                hi2[k] = std::max(hi2[k], v);
              }
              bool some = false;
              for (std::size_t k = 0; k < K; ++k) {
                if (lo1[k] == inf || lo2[k] == inf) continue;
                const double sup = std::max(hi1[k] - lo2[k], hi2[k] - lo1[k]);
                if (sup > 3.0 * eps) {
                  ++hits[slot][k];
                  some = true;
                }
              }
              if (some) ++any[slot];
            }
          }
        }

        const double T = static_cast<double>(c.trials);
        for (std::size_t ki = 0; ki < nk; ++ki) {
          for (std::size_t ei = 0; ei < ne; ++ei) {
            const std::size_t slot = ki * ne + ei;
            BinBoundPoint p;
            p.dist = dist;
            p.delta = delta;
            p.n1 = n1;
            p.n2 = n2;
            p.K = c.K[ki];
            p.eps = c.eps[ei];
            p.trials = c.trials;
            for (std::size_t h : hits[slot]) p.freq_per_k.push_back(static_cast<double>(h) / T);
            p.freq_max_k = *std::max_element(p.freq_per_k.begin(), p.freq_per_k.end());
            p.freq_any_k = static_cast<double>(any[slot]) / T;
            p.dkw = dkw_term(nmin, p.eps);
            p.p_hat = static_cast<double>(phits[slot]) / T;
            p.bound = p.dkw + p.p_hat + delta;
            p.bound_n1 = dkw_term(n1, p.eps) + p.p_hat + delta;
            p.se = std::hypot(binomial_se(p.freq_max_k, c.trials), binomial_se(p.p_hat, c.trials));
            p.vacuous = p.bound >= 1.0;
            p.passed = p.vacuous || p.freq_max_k <= p.bound + 3.0 * p.se;
            if (p.vacuous) {
              ++report.vacuous;
            } else {
              ++report.checked;
              if (!p.passed) {
                ++report.failed;
                logger().warn("bin bound violated: dist={} delta={} n={} K={} eps={} freq={} bound={}",
                            to_string(dist), delta, n1, p.K, p.eps, p.freq_max_k, p.bound);
              }
            }
            report.points.push_back(std::move(p));
          }
        }
      }
    }
  }
  return report;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("spearman: lengths differ");
  if (x.size() < 2) return 0.0;
  return pearson(average_ranks(x), average_ranks(y));
}

double spearman_p_value(const std::vector<double>& x, const std::vector<double>& y, Rng& rng,
                        std::size_t mc_draws) {
  if (x.size() != y.size()) throw ShapeError("spearman_p_value: lengths differ");
  if (x.size() < 2) return 1.0;
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const double obs = pearson(rx, ry) - 1e-12;
  std::vector<double> perm = ry;
  std::size_t ge = 0, total = 0;
  if (x.size() <= 8) {
    std::vector<std::size_t> idx(ry.size());
    std::iota(idx.begin(), idx.end(), 0);
    do {
      for (std::size_t i = 0; i < idx.size(); ++i) perm[i] = ry[idx[i]];
      if (pearson(rx, perm) >= obs) ++ge;
      ++total;
    } while (std::next_permutation(idx.begin(), idx.end()));
    return static_cast<double>(ge) / static_cast<double>(total);
  }
  for (std::size_t d = 0; d < mc_draws; ++d) {
    std::shuffle(perm.begin(), perm.end(), rng);
    if (pearson(rx, perm) >= obs) ++ge;
  }
  return static_cast<double>(ge + 1) / static_cast<double>(mc_draws + 1);
}

std::map<int, std::vector<std::size_t>> visitation_counts(const OfflineDataset& ds) {
  std::map<int, std::vector<std::size_t>> out;
  const std::size_t cells = ds.family.mdp.num_cells();
  for (const auto& l : ds.family.train) out[l.level_id].assign(cells, 0);
  for (const auto& tr : ds.transitions) {
    auto it = out.find(tr.level_id);
    if (it == out.end()) throw ContractError(fmt::format("transition from unknown level {}", tr.level_id));
    ++it->second[tr.state];
  }
  return out;
}

std::vector<double> count_based_sr_norms(const OfflineDataset& ds, int level_id, double gamma,
                                         bool reset_at_goal) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractError("count_based_sr_norms: gamma must be in [0, 1)");
  const std::size_t cells = ds.family.mdp.num_cells();
  std::vector<std::size_t> n(cells, 0);
  std::vector<std::map<std::size_t, std::size_t>> edges(cells);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.transitions.size(); ++i) {
    if (ds.transitions[i].level_id == level_id) idx.push_back(i);
  }
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const Transition& tr = ds.transitions[idx[j]];
    std::size_t to = tr.next_state;
    if (reset_at_goal && tr.done) {
      // the episode stream continues at the next episode's first state
      to = ds.transitions[idx[(j + 1) % idx.size()]].state;
    }
    ++n[tr.state];
    ++edges[tr.state][to];
  }
  // |Psi(s)|_1 = 1 + gamma * sum_s' P(s'|s) |Psi(s')|_1, P = n(s,s') / (n(s) + 1)
  std::vector<double> v(cells, 1.0), next(cells);
  for (int it = 0; it < 200000; ++it) {
    double change = 0.0;
    for (std::size_t s = 0; s < cells; ++s) {
      double acc = 0.0;
      for (const auto& [to, cnt] : edges[s]) acc += static_cast<double>(cnt) * v[to];
      next[s] = 1.0 + gamma * acc / static_cast<double>(n[s] + 1);
      change = std::max(change, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (change < 1e-14) break;
  }
  return v;
}

VisitationReport verify_visitation(const OfflineDataset& ds, const GvfValueTable* values, std::size_t K,
                       double gamma, std::uint64_t seed, bool reset_at_goal) {
  if (K == 0) throw ConfigError("theory.K", "must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("theory.gamma", "must be in (0, 1)");
  if (ds.transitions.empty()) throw ContractError("verify_visitation: empty dataset");
  ds.check_split();

  const auto counts = visitation_counts(ds);
  std::map<int, std::vector<double>> norms;
  for (const auto& [lvl, c] : counts) norms[lvl] = count_based_sr_norms(ds, lvl, gamma, reset_at_goal);

  VisitationReport r;
  r.K = K;
  r.reset_at_goal = reset_at_goal;

  std::vector<int> level_of;
  std::vector<double> vals;
  level_of.reserve(ds.transitions.size());
  vals.reserve(ds.transitions.size());
  for (const auto& tr : ds.transitions) {
    level_of.push_back(tr.level_id);
    vals.push_back(values ? values->at(tr.level_id, tr.state) : norms.at(tr.level_id)[tr.state]);
  }
  const BinLabeling lab = assign_labels(level_of, vals, K);
  std::vector<double> sum(K, 0.0);
  r.bin_size.assign(K, 0);
  for (std::size_t i = 0; i < ds.transitions.size(); ++i) {
    const auto& tr = ds.transitions[i];
    const std::size_t k = static_cast<std::size_t>(lab.labels[i]) - 1;
    sum[k] += static_cast<double>(counts.at(tr.level_id)[tr.state]);
    ++r.bin_size[k];
  }
  std::vector<double> xs, ys;
  r.bin_mean_count.assign(K, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < K; ++k) {
    if (r.bin_size[k] == 0) continue;
    r.bin_mean_count[k] = sum[k] / static_cast<double>(r.bin_size[k]);
    xs.push_back(static_cast<double>(k + 1));
    ys.push_back(r.bin_mean_count[k]);
  }
  Rng rng = make_rng(seed, streams::kTheory);
  r.spearman = spearman(xs, ys);
  r.p_value = spearman_p_value(xs, ys, rng);
  r.monotone_passed = r.spearman > 0.0 && r.p_value < 0.05;

  const double g2 = gamma * gamma / (1.0 - gamma);
  for (const auto& [lvl, c] : counts) {
    const auto& v = norms.at(lvl);
    for (std::size_t s = 0; s < c.size(); ++s) {
      if (ds.family.mdp.is_wall(s)) continue;
      SandwichRow row;
      row.level_id = lvl;
      row.cell = s;
      row.count = c[s];
      row.norm = v[s];
      const double inv = gamma / static_cast<double>(c[s] + 1);
      row.printed_lower = inv + 1.0 + gamma;
      row.printed_upper = inv + g2 + 1.0 + gamma;
      row.lower = 1.0 + gamma - inv;
      row.upper = 1.0 + gamma - inv + g2;
      const auto tol = [&](double b) { return r.tolerance * std::max(1.0, std::abs(b)); };
      if (row.norm < row.printed_lower - tol(row.printed_lower) ||
          row.norm > row.printed_upper + tol(row.printed_upper)) {
        ++r.printed_violations;
      }
      if (row.norm < row.lower - tol(row.lower) || row.norm > row.upper + tol(row.upper)) {
        ++r.violations;
      }
      r.rows.push_back(row);
    }
  }
  return r;
}

void write_bin_bound_csv(const std::string& path, const BinBoundReport& r) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "distribution,delta,n1,n2,K,eps,trials,freq_max_k,freq_any_k,dkw,p_hat,bound,bound_n1,se,"
       "vacuous,passed,freq_per_k\n";
  for (const auto& p : r.points) {
    std::string per;
    for (std::size_t k = 0; k < p.freq_per_k.size(); ++k) {
      per += (k ? ";" : "") + fmt::format("{}", p.freq_per_k[k]);
    }
    f << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(p.dist),
                     p.delta, p.n1, p.n2, p.K, p.eps, p.trials, p.freq_max_k, p.freq_any_k, p.dkw,
                     p.p_hat, p.bound, p.bound_n1, p.se, p.vacuous ? 1 : 0, p.passed ? 1 : 0, per);
  }
  if (!f) throw IoError("write failed: " + path);
}

void write_visitation_csv(const std::string& path, const VisitationReport& r) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "level_id,cell,count,norm,printed_lower,printed_upper,lower,upper\n";
  for (const auto& row : r.rows) {
    f << fmt::format("{},{},{},{},{},{},{},{}\n", row.level_id, row.cell, row.count, row.norm,
                     row.printed_lower, row.printed_upper, row.lower, row.upper);
  }
  if (!f) throw IoError("write failed: " + path);
}

std::string theory_summary_json(const BinBoundReport& t1, const VisitationReport& t2) {
  nlohmann::json j;
  j["bin_bound"] = {{"points", t1.points.size()},
                    {"checked", t1.checked},
                    {"vacuous", t1.vacuous},
                    {"failed", t1.failed},
                    {"passed", t1.passed()}};
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& p : t1.points) {
    if (p.passed) continue;
    fails.push_back({{"distribution", to_string(p.dist)}, {"delta", p.delta}, {"n", p.n1},
                     {"K", p.K}, {"eps", p.eps}, {"freq_max_k", p.freq_max_k},
                     {"bound", p.bound}});
  }
  j["bin_bound"]["failures"] = fails;
  nlohmann::json means = nlohmann::json::array();
  for (double m : t2.bin_mean_count) {
    if (std::isfinite(m)) {
      means.push_back(m);
    } else {
      means.push_back(nullptr);
    }
  }
  j["visitation"] = {{"K", t2.K},
                     {"bin_mean_count", means},
                     {"bin_size", t2.bin_size},
                     {"spearman", t2.spearman},
                     {"p_value", t2.p_value},
                     {"monotone_passed", t2.monotone_passed},
                     {"states", t2.rows.size()},
                     {"printed_violations", t2.printed_violations},
                     {"violations", t2.violations},
                     {"printed_sandwich_passed", t2.printed_sandwich_passed()},
                     {"sandwich_passed", t2.sandwich_passed()}};
  return j.dump(2);
}

}  // namespace gsf
