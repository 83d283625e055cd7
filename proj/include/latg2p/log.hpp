// Copyright 2026 The latg2p Authors
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
#include <iostream>
#include <string_view>

namespace latg2p {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2 };

inline std::atomic<int>& log_level_storage() {
  static std::atomic<int> level{static_cast<int>(LogLevel::Warn)};
  return level;
}

inline void set_log_level(LogLevel level) { log_level_storage() = static_cast<int>(level); }

inline void log_warn(std::string_view msg) {
  if (log_level_storage() >= static_cast<int>(LogLevel::Warn)) std::clog << "[warn] " << msg << '\n';
}

inline void log_info(std::string_view msg) {
  if (log_level_storage() >= static_cast<int>(LogLevel::Info)) std::clog << "[info] " << msg << '\n';
}

}  // namespace latg2p
