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

#include "gsf/checkpoint.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gsf/binio.h"
#include "gsf/error.h"

namespace gsf {
namespace {

constexpr char kMagic[8] = {'G', 'S', 'F', 'C', 'K', 'P', 'T', '\0'};

}  // namespace

void Checkpoint::add(const std::string& name, const Tensor& t) {
  if (contains(name)) throw ContractError("duplicate checkpoint entry '" + name + "'");
  tensors.emplace_back(name, t);
}

void Checkpoint::add(std::span<Parameter* const> params) {
  for (const Parameter* p : params) add(p->name, p->value);
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(tensors.begin(), tensors.end(),
                     [&](const auto& e) { return e.first == name; });
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw IoError("checkpoint has no tensor named '" + name + "'");
}

void Checkpoint::restore(std::span<Parameter* const> params) const {
  for (Parameter* p : params) {
    const Tensor& t = get(p->name);
    if (t.shape() != p->value.shape()) {
      throw ShapeError("checkpoint tensor '" + p->name + "' has shape " + t.shape_string() +
                       ", parameter expects " + p->value.shape_string());
    }
    p->value = t;
  }
}

std::string Checkpoint::serialize() const {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, sizeof(kMagic));
  binio::put<std::uint8_t>(os, kVersion);
  binio::put_string(os, meta);
  binio::put<std::uint64_t>(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    binio::put_string(os, name);
    std::vector<std::uint64_t> dims(t.shape().begin(), t.shape().end());
    binio::put_vector(os, dims);
    std::vector<double> data(t.data().begin(), t.data().end());
    binio::put_vector(os, data);
  }
  return os.str();
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw IoError("not a checkpoint (bad magic)");
  }
  const auto version = binio::get<std::uint8_t>(is, "checkpoint version");
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.meta = binio::get_string(is, "checkpoint meta");
  const auto count = binio::get<std::uint64_t>(is, "tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = binio::get_string(is, "tensor name", 4096);
    auto dims = binio::get_vector<std::uint64_t>(is, "tensor shape", 64 * 8);
    auto data = binio::get_vector<double>(is, "tensor data");
    Shape shape(dims.begin(), dims.end());
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  const std::string bytes = ckpt.serialize();
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  try {
    return Checkpoint::deserialize(buf.str());
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace gsf
