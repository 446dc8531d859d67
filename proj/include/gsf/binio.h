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

// Little-endian binary read/write helpers shared by the checkpoint and
// dataset formats. Values are written in host byte order; both formats
// refuse to load on big-endian hosts.

#ifndef GSF_BINIO_H_
#define GSF_BINIO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "gsf/error.h"

namespace gsf::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
  requires std::is_trivially_copyable_v<T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
void put_vector(std::ostream& os, const std::vector<T>& v) {
  put<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError(std::string("truncated input while reading ") + what);
  }
  return v;
}

inline std::string get_string(std::istream& is, const char* what,
                              std::uint64_t limit = 1ull << 32) {
  const auto n = get<std::uint64_t>(is, what);
  if (n > limit) throw IoError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw IoError(std::string("truncated input while reading ") + what);
  }
  return s;
}

template <typename T>
std::vector<T> get_vector(std::istream& is, const char* what,
                          std::uint64_t limit = 1ull << 34) {
  const auto n = get<std::uint64_t>(is, what);
  if (n * sizeof(T) > limit) throw IoError(std::string("implausible length for ") + what);
  std::vector<T> v(n);
  if (n > 0 && !is.read(reinterpret_cast<char*>(v.data()),
                        static_cast<std::streamsize>(n * sizeof(T)))) {
    throw IoError(std::string("truncated input while reading ") + what);
  }
  return v;
}

}  // namespace gsf::binio

#endif  // GSF_BINIO_H_
