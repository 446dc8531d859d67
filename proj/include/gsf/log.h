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

#ifndef GSF_LOG_H_
#define GSF_LOG_H_

#include <chrono>
#include <memory>
#include <string>

#include <spdlog/spdlog.h>

namespace gsf {

// Shared stderr logger. Verbosity comes from the GSF_LOG environment variable
// (trace, debug, info, warn, error, off); the default is "warn".
spdlog::logger& logger();

// Logs the wall time of a pipeline stage at info level when destroyed.
class StageTimer {
 public:
  explicit StageTimer(std::string stage);
  ~StageTimer();
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;
  double elapsed_seconds() const;

 private:
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace gsf

#endif  // GSF_LOG_H_
