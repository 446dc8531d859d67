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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "gsf/error.h"
#include "gsf/quantile.h"
#include "gsf/random.h"
#include "oracles.h"

namespace gsf {
namespace {

std::vector<double> random_sample(Rng& rng, std::size_t n, bool ties) {
  std::vector<double> xs(n);
  if (ties) {
    std::uniform_int_distribution<int> u(0, std::max<int>(1, static_cast<int>(n) / 4));
    for (double& x : xs) x = 0.5 * u(rng);
  } else {
    std::normal_distribution<double> g(0.0, 3.0);
    for (double& x : xs) x = g(rng);
  }
  return xs;
}

TEST(Quantile, SmallExample) {
  const EmpiricalQuantile eq({4.0, 1.0, 3.0, 2.0});
  EXPECT_EQ(quantile(eq, 0.5), 2.0);
  EXPECT_EQ(quantile(eq, 0.0), 1.0);
  EXPECT_EQ(quantile(eq, 1.0), 4.0);
  EXPECT_EQ(quantile(eq, 0.51), 3.0);
  EXPECT_EQ(eq.cdf(2.0), 0.5);
  EXPECT_EQ(eq.cdf(0.0), 0.0);
}

TEST(Quantile, Errors) {
  EXPECT_THROW(EmpiricalQuantile({}), ContractError);
  const EmpiricalQuantile eq({1.0});
  EXPECT_THROW(eq.quantile(1.5), ContractError);
  EXPECT_THROW(eq.quantile(-0.1), ContractError);
}

TEST(Quantile, MatchesDefinitionScan) {
  Rng rng(1);
  std::uniform_int_distribution<std::size_t> size(1, 60);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const auto xs = random_sample(rng, size(rng), rep % 2 == 0);
    const EmpiricalQuantile eq(xs);
    for (double p : {0.0, 1.0, u01(rng), u01(rng), 0.5, 1.0 / 3.0}) {
      EXPECT_EQ(eq.quantile(p), oracle::quantile(xs, p));
    }
  }
}

TEST(Quantile, MonotoneInP) {
  Rng rng(2);
  const auto xs = random_sample(rng, 101, true);
  const EmpiricalQuantile eq(xs);
  double prev = eq.quantile(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double q = eq.quantile(i / 1000.0);
    EXPECT_GE(q, prev);
    prev = q;
  }
}

TEST(Labels, MatchMaxKOracle) {
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> size(1, 80), kk(1, 10);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t K = kk(rng);
    const auto xs = random_sample(rng, std::max(K, size(rng)), rep % 3 == 0);
    const std::vector<int> levels(xs.size(), 0);
    EXPECT_EQ(assign_labels(levels, xs, K).labels, oracle::labels(xs, K));
  }
}

TEST(Labels, SixDistinctValuesThreeBins) {
  const std::vector<double> xs{0.6, 0.1, 0.5, 0.3, 0.2, 0.4};
  const std::vector<int> levels(6, 0);
  const auto lab = assign_labels(levels, xs, 3);
  std::vector<int> sizes(3, 0);
  for (int l : lab.labels) ++sizes[static_cast<std::size_t>(l - 1)];
  // Frozen from the oracle: boundary samples take the larger bin, so the
  // sizes are (1,2,3) rather than (2,2,2).
  EXPECT_EQ(sizes, (std::vector<int>{1, 2, 3}));
  for (int s : sizes) EXPECT_LE(std::abs(s - 2), 1);
  EXPECT_EQ(lab.labels, oracle::labels(xs, 3));
}

TEST(Labels, SingleBinAndAllEqual) {
  const std::vector<double> xs{3.0, 1.0, 2.0};
  const std::vector<int> levels(3, 5);
  for (int l : assign_labels(levels, xs, 1).labels) EXPECT_EQ(l, 1);
  const std::vector<double> same(9, 2.5);
  const std::vector<int> lv(9, 0);
  for (int l : assign_labels(lv, same, 3).labels) EXPECT_EQ(l, 3);
}

TEST(Labels, BinSizesForDistinctValues) {
  Rng rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t K = 1 + rep % 9;
    const std::size_t n = K + static_cast<std::size_t>(rep) * 3 % 200;
    const auto xs = random_sample(rng, n, false);
    const std::vector<int> levels(n, 0);
    std::vector<int> sizes(K, 0);
    for (int l : assign_labels(levels, xs, K).labels) ++sizes[static_cast<std::size_t>(l - 1)];
    for (int s : sizes) {
      EXPECT_LE(std::abs(static_cast<double>(s) - static_cast<double>(n) / K), 1.0)
          << "n=" << n << " K=" << K;
    }
  }
}

TEST(Labels, PerLevelAndPermutationInvariant) {
  Rng rng(5);
  std::vector<double> xs;
  std::vector<int> levels;
  for (int lvl = 0; lvl < 4; ++lvl) {
    const auto part = random_sample(rng, 30 + lvl * 7, lvl % 2 == 0);
    for (double x : part) {
      xs.push_back(x * (lvl + 1) + 10.0 * lvl);
      levels.push_back(lvl);
    }
  }
  const auto base = assign_labels(levels, xs, 7);
  EXPECT_EQ(base.boundaries.size(), 4u);
  std::vector<std::size_t> perm(xs.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> px;
  std::vector<int> pl;
  for (std::size_t i : perm) {
    px.push_back(xs[i]);
    pl.push_back(levels[i]);
  }
  const auto shuffled = assign_labels(pl, px, 7);
  for (std::size_t j = 0; j < perm.size(); ++j) {
    EXPECT_EQ(shuffled.labels[j], base.labels[perm[j]]);
  }
}

TEST(Labels, RankInvariance) {
  Rng rng(6);
  for (int rep = 0; rep < 50; ++rep) {
    std::uniform_int_distribution<int> u(-400, 400);
    std::vector<double> xs(120);
    for (double& x : xs) x = u(rng) * 0.01;
    const std::vector<int> levels(xs.size(), 1);
    const auto base = assign_labels(levels, xs, 7).labels;
    std::vector<double> affine, cubic, expo;
    for (double x : xs) {
      affine.push_back(3.0 * x - 2.0);
      cubic.push_back(x * x * x + x);
      expo.push_back(std::exp(x));
    }
    EXPECT_EQ(assign_labels(levels, affine, 7).labels, base);
    EXPECT_EQ(assign_labels(levels, cubic, 7).labels, base);
    EXPECT_EQ(assign_labels(levels, expo, 7).labels, base);
  }
}

TEST(Labels, TooFewSamplesNamesLevel) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const std::vector<int> levels{0, 0, 0, 9};
  try {
    assign_labels(levels, xs, 2);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("level 9"), std::string::npos);
  }
  const auto batch = assign_batch_labels(levels, xs, 2);
  EXPECT_EQ(batch.skipped_levels, 1u);
  EXPECT_EQ(batch.skipped_samples, 1u);
  EXPECT_EQ(batch.labels[3], 0);
  EXPECT_GT(batch.labels[0], 0);
}

TEST(Distance, Basics) {
  EXPECT_EQ(gvf_distance(3.0, 3.0), 0.0);
  EXPECT_EQ(gvf_distance(1.0, 4.0), 3.0);
  EXPECT_EQ(gvf_distance(4.0, 1.0), 3.0);
  // Values inside [-c/(1-g), c/(1-g)] for two levels are at most
  // (c1 + c2)/(1-g) apart.
  const double g = 0.99, c1 = 1.0, c2 = 2.0;
  EXPECT_LE(gvf_distance(c1 / (1 - g), -c2 / (1 - g)), (c1 + c2) / (1 - g) + 1e-9);
}

}  // namespace
}  // namespace gsf
