// Copyright 2026 The demoselect Authors
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

#include "demoselect/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>

namespace demoselect {

spdlog::logger& Log() {
  static const auto logger = [] {
    auto l = spdlog::stderr_logger_mt("demoselect");
    l->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::err;
    if (const char* env = std::getenv("DEMOSELECT_LOG")) {
      // from_str maps unknown names to off; keep the default for those.
      const std::string v(env);
      const auto parsed = spdlog::level::from_str(v);
      if (parsed != spdlog::level::off || v == "off") level = parsed;
    }
    l->set_level(level);
    return l;
  }();
  return *logger;
}

}  // namespace demoselect
