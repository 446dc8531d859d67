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

#ifndef GSF_AUGMENT_H_
#define GSF_AUGMENT_H_

#include <array>
#include <cstddef>
#include <span>

#include "gsf/random.h"
#include "gsf/tensor.h"

namespace gsf {

// Zero-pads each spatial side of a C x H x W observation by `pad` and crops
// back to H x W at offset (dy, dx), each in [0, 2*pad]. All channels share
// the offset. pad = 0 is the identity.
void random_crop_into(std::span<const double> in, std::span<double> out,
                      const std::array<std::size_t, 3>& shape, std::size_t pad, Rng& rng);
void crop_at(std::span<const double> in, std::span<double> out,
             const std::array<std::size_t, 3>& shape, std::size_t pad, std::size_t dy,
             std::size_t dx);

// Rank-3 convenience wrapper.
Tensor augment(const Tensor& obs, std::size_t pad, Rng& rng);

}  // namespace gsf

#endif  // GSF_AUGMENT_H_
