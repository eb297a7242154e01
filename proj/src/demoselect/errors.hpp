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

#ifndef DEMOSELECT_ERRORS_HPP_
#define DEMOSELECT_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace demoselect {

enum class ErrorKind {
  // usage / configuration
  kUsage,
  kConfig,
  kBadSplit,
  kBadK,
  kEmptyPool,
  kEmptyInput,
  kEmptyQuerySet,
  kOverlap,
  kPoolTooLarge,
  // data / parse
  kParse,
  kMissingFile,
  kIo,
  kShapeMismatch,
  kDimensionMismatch,
  kZeroVector,
  kEmptyBatch,
  kNonFinite,
  kIndexOutOfRange,
  kMissingEntry,
  kCardinalityUnsupported,
  kChosenSetNotEnumerated,
  // evaluator process
  kProtocol,
  kEvaluatorCrashed,
  kTimeout,
};

// Process-level outcome classes; the numeric values double as CLI exit codes.
enum class ErrorClass : int {
  kUsage = 1,
  kData = 2,
  kOracle = 3,
};

std::string_view ErrorKindName(ErrorKind kind);
ErrorClass ClassOf(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  // The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace demoselect

#endif  // DEMOSELECT_ERRORS_HPP_
