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

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "gsf/error.h"

namespace gsf {
namespace {

// Dense Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

OfflineDataset small_dataset(std::uint64_t seed, std::size_t steps) {
  const Family f = generate_family(seed, 2, 1);
  const TabularQ q = train_behavior_policy(f.mdp, {}, seed);
  return collect(f, q, {steps, 0.3, 0.1}, seed);
}

Transition make_tr(int level, std::size_t s, std::size_t next) {
  Transition t;
  t.level_id = level;
  t.state = static_cast<std::uint32_t>(s);
  t.next_state = static_cast<std::uint32_t>(next);
  return t;
}

TEST(EstimateP, PointMassNeverExceeds) {
  Rng rng(1);
  EXPECT_EQ(estimate_p(100, 7, 0.01, ValueDistribution::kPointMassMixture, 1, rng) >= 0.0, true);
  // a single atom: use the degenerate case of the uniform range with eps above 1
  EXPECT_EQ(estimate_p(100, 7, 1.0, ValueDistribution::kUniform, 200, rng), 0.0);
}

TEST(EstimateP, SingleBinIsRange) {
  Rng rng(2);
  EXPECT_EQ(estimate_p(50, 1, 1.0, ValueDistribution::kUniform, 500, rng), 0.0);
}

TEST(EstimateP, ManySamplesFineBins) {
  Rng rng(3);
  EXPECT_LE(estimate_p(1000, 10, 0.3, ValueDistribution::kUniform, 2000, rng), 0.001);
}

TEST(EstimateP, MatchesTwoSampleClosedForm) {
  // n=2: the only nonzero gap is |U1 - U2|; P[|U1 - U2| > e] = (1 - e)^2
  Rng rng(4);
  const std::size_t trials = 200000;
  for (double e : {0.2, 0.5, 0.8}) {
    const double p = estimate_p(2, 2, e, ValueDistribution::kUniform, trials, rng);
    const double want = (1.0 - e) * (1.0 - e);
    EXPECT_NEAR(p, want, 4.0 * std::sqrt(want * (1 - want) / trials)) << e;
  }
}

TEST(EstimateP, MixtureGapsAreAtomDistances) {
  // Atoms 0, .5, 1 are .5 apart, so gaps exceed .6 only if an atom is
  // skipped between adjacent quantiles; with K=1 the gap is the range.
  Rng rng(5);
  const std::size_t trials = 100000;
  // range > .6 iff both 0 and 1 are present: 1 - P(no 0) - P(no 1) + P(only .5)
  const double want = 1.0 - std::pow(0.5, 3) - std::pow(0.8, 3) + std::pow(0.3, 3);
  const double p = estimate_p(3, 1, 0.6, ValueDistribution::kPointMassMixture, trials, rng);
  EXPECT_NEAR(p, want, 4.0 * std::sqrt(want * (1 - want) / trials));
}

TEST(EstimateP, RejectsZeroSizes) {
  Rng rng(6);
  EXPECT_THROW(estimate_p(0, 1, 0.1, ValueDistribution::kUniform, 1, rng), ContractError);
  EXPECT_THROW(estimate_p(5, 0, 0.1, ValueDistribution::kUniform, 1, rng), ContractError);
}

TEST(Dkw, Formula) {
  EXPECT_NEAR(dkw_term(200, 0.1), 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(dkw_term(50, 0.3), 2.0 * std::exp(-50 * 0.09 / 2), 1e-15);
}

TEST(BinBound, SmallGridHolds) {
  BinBoundConfig c;
  c.n = {200};
  c.K = {2, 7};
  c.eps = {0.1, 0.3};
  c.delta = {0.0, 0.05};
  c.distributions = {ValueDistribution::kUniform};
  c.trials = 400;
  const BinBoundReport r = verify_bin_bound(c, 7);
  ASSERT_EQ(r.points.size(), 8u);
  EXPECT_TRUE(r.passed());
  for (const auto& p : r.points) {
    EXPECT_EQ(p.freq_per_k.size(), p.K);
    EXPECT_NEAR(p.bound, p.dkw + p.p_hat + p.delta, 1e-15);
    EXPECT_EQ(p.vacuous, p.bound >= 1.0);
    EXPECT_LE(p.freq_max_k, p.freq_any_k);
  }
}

TEST(BinBound, DeltaEventDrivesViolations) {
  // With the gap event always on, G2 is shifted by 5 eps and every bin is
  // more than 3 eps away; the bound (>= 1) is vacuous.
  BinBoundConfig c;
  c.n = {200};
  c.K = {2};
  c.eps = {0.3};
  c.delta = {1.0};
  c.distributions = {ValueDistribution::kUniform};
  c.trials = 100;
  const BinBoundReport r = verify_bin_bound(c, 7);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_EQ(r.points[0].freq_max_k, 1.0);
  EXPECT_TRUE(r.points[0].vacuous);
}

TEST(BinBound, Deterministic) {
  BinBoundConfig c;
  c.n = {50};
  c.K = {7};
  c.eps = {0.3};
  c.distributions = {ValueDistribution::kGaussian};
  c.trials = 200;
  const BinBoundReport a = verify_bin_bound(c, 3), b = verify_bin_bound(c, 3);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].freq_per_k, b.points[i].freq_per_k);
    EXPECT_EQ(a.points[i].p_hat, b.points[i].p_hat);
  }
}

TEST(BinBound, RejectsBadConfig) {
  BinBoundConfig c;
  c.trials = 0;
  EXPECT_THROW(verify_bin_bound(c, 1), ConfigError);
  c = {};
  c.K = {100};
  c.n = {50};
  EXPECT_THROW(verify_bin_bound(c, 1), ConfigError);
  c = {};
  c.delta = {1.5};
  EXPECT_THROW(verify_bin_bound(c, 1), ConfigError);
}

TEST(Spearman, KnownValues) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_NEAR(spearman(x, {10, 20, 30, 40}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, {4, 3, 2, 1}), -1.0, 1e-15);
  // ranks of y: 1.5 1.5 3.5 3.5 -> 4 / sqrt(5 * 4)
  EXPECT_NEAR(spearman(x, {1, 1, 2, 2}), 4.0 / std::sqrt(20.0), 1e-15);
  EXPECT_EQ(spearman(x, {1, 1, 1, 1}), 0.0);
}

TEST(Spearman, ExactPermutationPValue) {
  Rng rng(1);
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(spearman_p_value(x, {1, 2, 3, 4, 5}, rng), 1.0 / 120.0, 1e-15);
  EXPECT_NEAR(spearman_p_value(x, {5, 4, 3, 2, 1}, rng), 1.0, 1e-15);
}

TEST(Spearman, MonteCarloPValueForLongSeries) {
  Rng rng(2);
  std::vector<double> x(12);
  std::iota(x.begin(), x.end(), 1.0);
  EXPECT_LT(spearman_p_value(x, x, rng, 5000), 0.001);
}

TEST(Visitation, CountsMatchTransitions) {
  const OfflineDataset ds = small_dataset(21, 2000);
  const auto counts = visitation_counts(ds);
  std::size_t total = 0;
  for (const auto& [lvl, c] : counts) total += std::accumulate(c.begin(), c.end(), std::size_t{0});
  EXPECT_EQ(total, ds.transitions.size());
  for (const auto& [lvl, c] : counts) EXPECT_EQ(c[ds.family.mdp.goal], 0u);
}

TEST(CountSr, MatchesLinearSolve) {
  const OfflineDataset ds = small_dataset(22, 1500);
  const double gamma = 0.99;
  const std::size_t n = ds.family.mdp.num_cells();
  for (bool reset : {false, true}) {
    for (int lvl : ds.level_ids()) {
      std::vector<const Transition*> trs;
      for (const auto& tr : ds.transitions) {
        if (tr.level_id == lvl) trs.push_back(&tr);
      }
      std::vector<double> cnt(n, 0.0);
      for (const Transition* tr : trs) cnt[tr->state] += 1.0;
      std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
      for (std::size_t j = 0; j < trs.size(); ++j) {
        std::size_t to = trs[j]->next_state;
        if (reset && trs[j]->done) to = trs[(j + 1) % trs.size()]->state;
        a[trs[j]->state][to] -= gamma / (cnt[trs[j]->state] + 1.0);
      }
      for (std::size_t i = 0; i < n; ++i) a[i][i] += 1.0;
      const std::vector<double> want = solve(a, std::vector<double>(n, 1.0));
      const std::vector<double> got = count_based_sr_norms(ds, lvl, gamma, reset);
      for (std::size_t s = 0; s < n; ++s) EXPECT_NEAR(got[s], want[s], 1e-9) << s << " " << reset;
    }
  }
}

TEST(CountSr, ResetOnlyChangesGoalTransitions) {
  // Without goal-reaching transitions both readings coincide.
  OfflineDataset ds = small_dataset(29, 800);
  std::erase_if(ds.transitions, [](const Transition& t) { return t.done; });
  const int lvl = ds.level_ids().front();
  EXPECT_EQ(count_based_sr_norms(ds, lvl, 0.9, true), count_based_sr_norms(ds, lvl, 0.9, false));
}

TEST(CountSr, UnvisitedStateHasUnitNorm) {
  const OfflineDataset ds = small_dataset(23, 500);
  const auto counts = visitation_counts(ds);
  const int lvl = counts.begin()->first;
  const auto v = count_based_sr_norms(ds, lvl, 0.99);
  for (std::size_t s = 0; s < v.size(); ++s) {
    if (counts.at(lvl)[s] == 0) {
      EXPECT_DOUBLE_EQ(v[s], 1.0);
    }
  }
}

TEST(Visitation, UnvisitedStateBreaksPrintedLowerBound) {
  // n = 0, gamma = .99: printed lower bound .99 + 1 + .99 = 2.98 > |Psi|_1 = 1,
  // while 1 + gamma - gamma/(n+1) = 1 holds with equality.
  const OfflineDataset ds = small_dataset(24, 600);
  const VisitationReport r = verify_visitation(ds, nullptr, 3, 0.99, 1);
  bool saw = false;
  for (const auto& row : r.rows) {
    if (row.count != 0) continue;
    saw = true;
    EXPECT_NEAR(row.printed_lower, 2.98, 1e-12);
    EXPECT_DOUBLE_EQ(row.norm, 1.0);
    EXPECT_NEAR(row.lower, 1.0, 1e-12);
  }
  EXPECT_TRUE(saw);
  EXPECT_GT(r.printed_violations, 0u);
  EXPECT_EQ(r.violations, 0u);
}

TEST(Visitation, CorrectedSandwichHoldsEverywhere) {
  const OfflineDataset ds = small_dataset(26, 4000);
  for (bool reset : {false, true}) {
    const VisitationReport r = verify_visitation(ds, nullptr, 7, 0.99, 1, reset);
    EXPECT_EQ(r.violations, 0u);
    EXPECT_EQ(r.rows.size(), ds.family.train.size() * ds.family.mdp.free_cells().size());
  }
}

TEST(Visitation, GoalNeighborMeetsLowerBoundWithEquality) {
  // Absorbing reading: a cell whose every logged move reaches the goal has
  // |Psi|_1 = 1 + gamma n/(n+1), exactly the lower bound.
  const Family f = generate_family(30, 1, 1);
  OfflineDataset ds;
  ds.family = f;
  const int lvl = f.train[0].level_id;
  std::size_t nb = f.mdp.num_cells();
  for (std::size_t s : f.mdp.free_cells()) {
    for (std::size_t a = 0; a < 4 && nb == f.mdp.num_cells(); ++a) {
      if (s != f.mdp.goal && step(f.mdp, s, a).next == f.mdp.goal) nb = s;
    }
  }
  ASSERT_LT(nb, f.mdp.num_cells());
  for (int i = 0; i < 4; ++i) {
    Transition t = make_tr(lvl, nb, f.mdp.goal);
    t.done = true;
    ds.transitions.push_back(t);
  }
  const VisitationReport r = verify_visitation(ds, nullptr, 1, 0.99, 1, false);
  for (const auto& row : r.rows) {
    if (row.cell != nb) continue;
    EXPECT_NEAR(row.norm, 1.0 + 0.99 * 4.0 / 5.0, 1e-12);
    EXPECT_NEAR(row.norm, row.lower, 1e-12);
    EXPECT_LT(row.norm, row.printed_lower);
  }
}

TEST(Visitation, MostVisitedStateLandsInTopBin) {
  // Hand-made data: one cell loops on itself 50 times, eight other cells are
  // visited once each and lead to the goal.
  const Family f = generate_family(26, 1, 1);
  OfflineDataset ds;
  ds.family = f;
  const int lvl = f.train[0].level_id;
  std::vector<std::size_t> free;
  for (std::size_t s : f.mdp.free_cells()) {
    if (s != f.mdp.goal) free.push_back(s);
  }
  ASSERT_GE(free.size(), 9u);
  const std::size_t hub = free[0];
  for (int i = 0; i < 50; ++i) ds.transitions.push_back(make_tr(lvl, hub, hub));
  for (std::size_t i = 1; i < 9; ++i) ds.transitions.push_back(make_tr(lvl, free[i], f.mdp.goal));
  const VisitationReport r = verify_visitation(ds, nullptr, 3, 0.99, 1);
  // every hub transition falls in bin 3 and the others in lower bins
  EXPECT_EQ(r.bin_size[2], 50u);
  EXPECT_DOUBLE_EQ(r.bin_mean_count[2], 50.0);
  EXPECT_GT(r.spearman, 0.0);
}

TEST(Visitation, BinStatisticsCoverDataset) {
  const OfflineDataset ds = small_dataset(27, 6000);
  const VisitationReport r = verify_visitation(ds, nullptr, 7, 0.99, 1);
  ASSERT_EQ(r.bin_size.size(), 7u);
  EXPECT_EQ(std::accumulate(r.bin_size.begin(), r.bin_size.end(), std::size_t{0}),
            ds.transitions.size());
  EXPECT_EQ(r.monotone_passed, r.spearman > 0.0 && r.p_value < 0.05);
}

TEST(Visitation, SummaryJsonHasBothSections) {
  BinBoundConfig c;
  c.n = {50};
  c.K = {2};
  c.eps = {0.3};
  c.distributions = {ValueDistribution::kUniform};
  c.trials = 50;
  const BinBoundReport t1 = verify_bin_bound(c, 1);
  const VisitationReport t2 = verify_visitation(small_dataset(28, 800), nullptr, 3, 0.99, 1);
  const std::string js = theory_summary_json(t1, t2);
  EXPECT_NE(js.find("\"bin_bound\""), std::string::npos);
  EXPECT_NE(js.find("\"visitation\""), std::string::npos);
}

}  // namespace
}  // namespace gsf
