// Copyright 2026 kbauthz authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <ctime>
#include <string>

#include "kbauthz/util.hpp"

namespace kbauthz {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::time_t now() = 0;
  std::string now_rfc3339() { return format_rfc3339(now()); }
};

class WallClock : public Clock {
 public:
  std::time_t now() override { return std::time(nullptr); }
};

// Deterministic clock for simulation runs: starts at a fixed epoch and
// advances by a fixed step on every reading, so audit logs are
// byte-identical across runs that make the same sequence of calls.
class VirtualClock : public Clock {
 public:
  static constexpr std::time_t kDefaultBase = 1767225600;  // 2026-01-01T00:00:00Z

  explicit VirtualClock(std::time_t base = kDefaultBase, std::time_t step = 1)
      : next_(base), step_(step) {}

  std::time_t now() override { return next_.fetch_add(step_); }

  // reads without advancing
  std::time_t peek() const { return next_.load(); }

 private:
  std::atomic<std::time_t> next_;
  std::time_t step_;
};

}  // namespace kbauthz
