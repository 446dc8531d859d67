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

#include "gsf/augment.h"

#include <algorithm>

#include "gsf/error.h"

namespace gsf {

void crop_at(std::span<const double> in, std::span<double> out,
             const std::array<std::size_t, 3>& shape, std::size_t pad, std::size_t dy,
             std::size_t dx) {
  const auto [C, H, W] = shape;
  if (in.size() != C * H * W || out.size() != in.size()) {
    throw ShapeError("crop: buffer sizes do not match the observation shape");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      // Source row in unpadded coordinates.
      const long sy = static_cast<long>(y + dy) - static_cast<long>(pad);
      if (sy < 0 || sy >= static_cast<long>(H)) continue;
      for (std::size_t x = 0; x < W; ++x) {
        const long sx = static_cast<long>(x + dx) - static_cast<long>(pad);
        if (sx < 0 || sx >= static_cast<long>(W)) continue;
        out[(c * H + y) * W + x] =
            in[(c * H + static_cast<std::size_t>(sy)) * W + static_cast<std::size_t>(sx)];
      }
    }
  }
}

void random_crop_into(std::span<const double> in, std::span<double> out,
                      const std::array<std::size_t, 3>& shape, std::size_t pad, Rng& rng) {
  if (pad == 0) {
    if (in.size() != out.size()) throw ShapeError("crop: buffer sizes differ");
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  std::uniform_int_distribution<std::size_t> off(0, 2 * pad);
  const std::size_t dy = off(rng);
  const std::size_t dx = off(rng);
  crop_at(in, out, shape, pad, dy, dx);
}

Tensor augment(const Tensor& obs, std::size_t pad, Rng& rng) {
  if (obs.rank() != 3) throw ShapeError("augment expects C x H x W, got " + obs.shape_string());
  Tensor out(obs.shape(), 0.0);
  random_crop_into(obs.data(), out.data(), {obs.shape()[0], obs.shape()[1], obs.shape()[2]}, pad,
                   rng);
  return out;
}

}  // namespace gsf
