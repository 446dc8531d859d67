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

#include "gsf/quantile.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gsf/error.h"

namespace gsf {

EmpiricalQuantile::EmpiricalQuantile(std::vector<double> samples) : sorted_(std::move(samples)) {
  if (sorted_.empty()) throw ContractError("empirical quantile of an empty sample");
  for (double v : sorted_) {
    if (!std::isfinite(v)) throw ContractError("empirical quantile of a non-finite sample");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalQuantile::cdf(double g) const {
  const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), g) - sorted_.begin();
  return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

double EmpiricalQuantile::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError("quantile level must lie in [0,1]");
  // Smallest j in 1..n with j/n >= p; F is a step function so the infimum
  // is attained at a sample.
  const std::size_t n = sorted_.size();
  std::size_t lo = 1, hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (static_cast<double>(mid) / static_cast<double>(n) >= p) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return sorted_[lo - 1];
}

double quantile(const EmpiricalQuantile& eq, double p) { return eq.quantile(p); }

std::vector<double> bin_boundaries(const EmpiricalQuantile& eq, std::size_t K) {
  if (K < 1) throw ContractError("bin count K must be >= 1");
  std::vector<double> b(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    b[k] = eq.quantile(static_cast<double>(k) / static_cast<double>(K));
  }
  return b;
}

int bin_label(std::span<const double> boundaries, double g) {
  const std::size_t K = boundaries.size() - 1;
  // Bins whose lower edge is <= g form a prefix 1..k; the largest of them
  // also satisfies the upper-edge condition because edges are sorted.
  const auto lower = boundaries.subspan(0, K);
  const auto k = std::upper_bound(lower.begin(), lower.end(), g) - lower.begin();
  return std::max(1, static_cast<int>(k));
}

namespace {

std::map<int, std::vector<std::size_t>> group_by_level(std::span<const int> level_of,
                                                      std::span<const double> values) {
  if (level_of.size() != values.size()) {
    throw ContractError("level ids and values differ in length");
  }
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < level_of.size(); ++i) groups[level_of[i]].push_back(i);
  return groups;
}

std::vector<double> label_group(const std::vector<std::size_t>& idx,
                                std::span<const double> values, std::size_t K,
                                std::vector<int>& labels) {
  std::vector<double> v;
  v.reserve(idx.size());
  for (std::size_t i : idx) v.push_back(values[i]);
  const auto b = bin_boundaries(EmpiricalQuantile(std::move(v)), K);
  for (std::size_t i : idx) labels[i] = bin_label(b, values[i]);
  return b;
}

}  // namespace

BinLabeling assign_labels(std::span<const int> level_of, std::span<const double> values,
                          std::size_t K) {
  if (K < 1) throw ContractError("bin count K must be >= 1");
  BinLabeling out;
  out.K = K;
  out.labels.assign(values.size(), 0);
  for (const auto& [level, idx] : group_by_level(level_of, values)) {
    if (idx.size() < K) {
      throw ContractError("level " + std::to_string(level) + " has " +
                          std::to_string(idx.size()) + " samples, fewer than K=" +
                          std::to_string(K));
    }
    out.boundaries[level] = label_group(idx, values, K, out.labels);
  }
  return out;
}

BatchLabels assign_batch_labels(std::span<const int> level_of, std::span<const double> values,
                                std::size_t K) {
  if (K < 1) throw ContractError("bin count K must be >= 1");
  BatchLabels out;
  out.labels.assign(values.size(), 0);
  for (const auto& [level, idx] : group_by_level(level_of, values)) {
    if (idx.size() < K) {
      ++out.skipped_levels;
      out.skipped_samples += idx.size();
      continue;
    }
    label_group(idx, values, K, out.labels);
  }
  return out;
}

double gvf_distance(double a, double b) { return std::abs(a - b); }

void export_labels_jsonl(const std::string& path, std::span<const int> level_of,
                         std::span<const int> labels) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << nlohmann::json{{"index", i}, {"level", level_of[i]}, {"label", labels[i]}}.dump()
       << '\n';
  }
}

}  // namespace gsf
