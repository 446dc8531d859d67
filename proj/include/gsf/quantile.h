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

// Empirical quantiles and quantile-bin labels.
//
// With sorted samples x_(1) <= ... <= x_(n), the empirical CDF counts
// samples <= g, and the quantile function returns the smallest sample g
// with p <= F(g). Bin k (1-based) of K is [q((k-1)/K), q(k/K)]; a value on
// a shared boundary takes the larger bin index.

#ifndef GSF_QUANTILE_H_
#define GSF_QUANTILE_H_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gsf {

class EmpiricalQuantile {
 public:
  // Throws ContractError on an empty or non-finite sample.
  explicit EmpiricalQuantile(std::vector<double> samples);

  double cdf(double g) const;
  double quantile(double p) const;
  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

double quantile(const EmpiricalQuantile& eq, double p);

// b[0..K] with b[k] = quantile(k / K).
std::vector<double> bin_boundaries(const EmpiricalQuantile& eq, std::size_t K);

// Largest k in 1..K with b[k-1] <= g <= b[k]; g is clamped into [b[0], b[K]].
int bin_label(std::span<const double> boundaries, double g);

struct BinLabeling {
  std::size_t K = 0;
  std::map<int, std::vector<double>> boundaries;  // per level id
  std::vector<int> labels;                        // parallel to the input, 1..K
};

// Labels every sample against the quantiles of its own level.
// Throws ContractError naming the level if it has fewer than K samples.
BinLabeling assign_labels(std::span<const int> level_of, std::span<const double> values,
                          std::size_t K);

// Minibatch variant: levels with fewer than K samples in the batch are left
// unlabeled (label 0) and counted instead of raising.
struct BatchLabels {
  std::vector<int> labels;
  std::size_t skipped_levels = 0;
  std::size_t skipped_samples = 0;
};
BatchLabels assign_batch_labels(std::span<const int> level_of, std::span<const double> values,
                                std::size_t K);

// |a - b|.
double gvf_distance(double a, double b);

// One JSON object per line: index, level, label.
void export_labels_jsonl(const std::string& path, std::span<const int> level_of,
                         std::span<const int> labels);

}  // namespace gsf

#endif  // GSF_QUANTILE_H_
