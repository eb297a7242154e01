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

#ifndef DEMOSELECT_TEXT_HPP_
#define DEMOSELECT_TEXT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace demoselect::text {

std::vector<std::string_view> SplitCsvLine(std::string_view line);
std::string_view Trim(std::string_view s);

std::optional<double> ParseDouble(std::string_view s);
std::optional<std::uint32_t> ParseId(std::string_view s);

// Shortest decimal form that round-trips to the same double.
std::string FormatDouble(double v);

// Reads the whole file; throws kMissingFile or kIo.
std::string ReadFile(const std::filesystem::path& path);
// Writes atomically enough for our purposes; throws kIo.
void WriteFile(const std::filesystem::path& path, std::string_view contents);

}  // namespace demoselect::text

#endif  // DEMOSELECT_TEXT_HPP_
