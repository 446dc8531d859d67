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

// Monte-Carlo and exact checks of the two labeling results.
//
// Quantile-bin bound: for GVF values of two levels whose cumulants differ by
// more than (1-gamma) eps / gamma with probability at most delta,
//   P[sup_{o1,o2 in I(k)} |G1(o1) - G2(o2)| > 3 eps]
//       <= 2 exp(-2 n eps^2 / 4) + p(n, K, eps) + delta,
// with p(n, K, eps) = P[max adjacent empirical-quantile gap > eps] and
// n = min(n1, n2).
//
// Visitation sandwich: for the successor representation of the count-based
// empirical model P(s'|s) = n(s, s') / (n(s) + 1),
//   1 + gamma - gamma/(n+1) <= |Psi(s)|_1 <= 1 + gamma - gamma/(n+1) + gamma^2/(1-gamma).
// The printed form has +gamma/(n+1) in both bounds; both forms are checked.

#ifndef GSF_THEORY_H_
#define GSF_THEORY_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gsf/dataset.h"
#include "gsf/gvf.h"
#include "gsf/random.h"

namespace gsf {

enum class ValueDistribution { kUniform, kGaussian, kPointMassMixture };
ValueDistribution parse_value_distribution(const std::string& s);
std::string to_string(ValueDistribution d);

double draw_value(ValueDistribution d, Rng& rng);

// Monte-Carlo frequency that max_k |q(k/K) - q((k-1)/K)| > eps over samples
// of size n; the K gaps span the sample from its minimum to its maximum.
double estimate_p(std::size_t n, std::size_t K, double eps, ValueDistribution dist,
                  std::size_t trials, Rng& rng);

double dkw_term(std::size_t n, double eps);  // 2 exp(-2 n eps^2 / 4)

struct BinBoundConfig {
  std::vector<std::size_t> n = {50, 200, 1000};
  std::vector<std::size_t> K = {2, 7, 20};
  std::vector<double> eps = {0.05, 0.1, 0.3};
  std::vector<double> delta = {0.0, 0.05};
  std::vector<ValueDistribution> distributions = {
      ValueDistribution::kUniform, ValueDistribution::kGaussian,
      ValueDistribution::kPointMassMixture};
  double n2_ratio = 1.0;  // n2 = round(n * n2_ratio)
  double gamma = 0.99;
  double bad_gap = 5.0;  // GVF gap, in units of eps, when the delta event fires
  std::size_t trials = 10000;
};

struct BinBoundPoint {
  ValueDistribution dist = ValueDistribution::kUniform;
  double delta = 0.0;
  std::size_t n1 = 0, n2 = 0, K = 0;
  double eps = 0.0;
  std::size_t trials = 0;
  std::vector<double> freq_per_k;  // violation frequency of bin k (index k-1)
  double freq_max_k = 0.0;         // max over k of freq_per_k
  double freq_any_k = 0.0;         // frequency of a violation in some bin
  double dkw = 0.0;                // at min(n1, n2)
  double p_hat = 0.0;              // estimate_p at min(n1, n2), independent draws
  double bound = 0.0;              // dkw + p_hat + delta
  double bound_n1 = 0.0;           // same with n1 in place of min(n1, n2)
  double se = 0.0;                 // combined Monte-Carlo standard error
  bool vacuous = false;            // bound >= 1
  bool passed = true;              // vacuous or freq_max_k <= bound + 3 se
};

struct BinBoundReport {
  std::vector<BinBoundPoint> points;
  std::size_t checked = 0;
  std::size_t vacuous = 0;
  std::size_t failed = 0;
  bool passed() const { return failed == 0; }
};

BinBoundReport verify_bin_bound(const BinBoundConfig& config, std::uint64_t seed);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);
// One-sided P[rho >= observed] under random permutation of y; exact for
// n <= 8, Monte Carlo otherwise.
double spearman_p_value(const std::vector<double>& x, const std::vector<double>& y, Rng& rng,
                        std::size_t mc_draws = 20000);

// Per training level, how often each cell appears as o_t.
std::map<int, std::vector<std::size_t>> visitation_counts(const OfflineDataset& ds);
// |Psi(s)|_1 for every cell of one level under the count-based model. With
// reset_at_goal, a goal-reaching transition is counted as leading to the
// first state of the level's next episode (the data read as one continuing
// stream) instead of into the never-left goal cell.
std::vector<double> count_based_sr_norms(const OfflineDataset& ds, int level_id, double gamma,
                                         bool reset_at_goal = true);

struct SandwichRow {
  int level_id = 0;
  std::size_t cell = 0;
  std::size_t count = 0;
  double norm = 0.0;
  double printed_lower = 0.0, printed_upper = 0.0;
  double lower = 0.0, upper = 0.0;
};

struct VisitationReport {
  std::size_t K = 0;
  bool reset_at_goal = true;
  std::vector<double> bin_mean_count;  // index k-1
  std::vector<std::size_t> bin_size;
  double spearman = 0.0;
  double p_value = 1.0;
  bool monotone_passed = false;  // spearman > 0 and p < 0.05
  std::vector<SandwichRow> rows;
  std::size_t printed_violations = 0;
  std::size_t violations = 0;
  double tolerance = 1e-9;
  bool printed_sandwich_passed() const { return printed_violations == 0; }
  bool sandwich_passed() const { return violations == 0; }
};

// Labels come from `values` (e.g. learned successor-feature GVFs, reduced by
// the 1-norm) or, when null, from the count-based |Psi|_1 itself. Sandwich
// rows cover every non-wall cell of every training level.
VisitationReport verify_visitation(const OfflineDataset& ds, const GvfValueTable* values, std::size_t K,
                       double gamma, std::uint64_t seed, bool reset_at_goal = true);

void write_bin_bound_csv(const std::string& path, const BinBoundReport& r);
void write_visitation_csv(const std::string& path, const VisitationReport& r);
// Summary of both reports as JSON.
std::string theory_summary_json(const BinBoundReport& t1, const VisitationReport& t2);

}  // namespace gsf

#endif  // GSF_THEORY_H_
