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

#ifndef GSF_ERROR_H_
#define GSF_ERROR_H_

#include <stdexcept>
#include <string>

namespace gsf {

// Root of every exception thrown by the library. The C API maps each
// subclass onto a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (out-of-range cell, bad action, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor shapes. The message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by a forward op, a gradient, or a loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent configuration. `path()` is the dotted key path
// of the offending field, e.g. "agent.tau".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// File or stream failure, including bad magic numbers and version mismatch.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsf

#endif  // GSF_ERROR_H_
