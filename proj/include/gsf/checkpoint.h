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

#ifndef GSF_CHECKPOINT_H_
#define GSF_CHECKPOINT_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsf/autodiff.h"
#include "gsf/tensor.h"

namespace gsf {

// Flat named-tensor container.
//
//   "GSFCKPT\0" | u8 version | string meta | u64 count |
//   count x (string name | u64 rank | rank x u64 dim | u64 n | n x f64)
//
// Strings are u64-length-prefixed. `meta` is free-form (callers store JSON).
struct Checkpoint {
  static constexpr std::uint8_t kVersion = 1;

  std::string meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(const std::string& name, const Tensor& t);
  void add(std::span<Parameter* const> params);
  // Throws IoError if the name is missing.
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  // Copies stored values into matching parameters; shapes must agree.
  void restore(std::span<Parameter* const> params) const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gsf

#endif  // GSF_CHECKPOINT_H_
