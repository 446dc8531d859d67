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

#ifndef GSF_RANDOM_H_
#define GSF_RANDOM_H_

#include <cstdint>
#include <random>

namespace gsf {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for stream `stream` of a run seeded with `base`. Streams are
// statistically independent for distinct (base, stream) pairs.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix64(mix64(base) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// Named stream ids keep seeds stable when new consumers are added.
namespace streams {
inline constexpr std::uint64_t kFamily = 1;
inline constexpr std::uint64_t kBehavior = 2;
inline constexpr std::uint64_t kCollect = 3;
inline constexpr std::uint64_t kGvf = 4;
inline constexpr std::uint64_t kAgentInit = 5;
inline constexpr std::uint64_t kAgentBatches = 6;
inline constexpr std::uint64_t kAugment = 7;
inline constexpr std::uint64_t kEval = 8;
inline constexpr std::uint64_t kTheory = 9;
inline constexpr std::uint64_t kCumulant = 10;
inline constexpr std::uint64_t kGradcheck = 11;
}  // namespace streams

inline Rng make_rng(std::uint64_t base, std::uint64_t stream) {
  return Rng(derive_seed(base, stream));
}

}  // namespace gsf

#endif  // GSF_RANDOM_H_
