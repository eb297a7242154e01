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

#include "demoselect/errors.hpp"

namespace demoselect {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "Usage";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kBadSplit: return "BadSplit";
    case ErrorKind::kBadK: return "BadK";
    case ErrorKind::kEmptyPool: return "EmptyPool";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kEmptyQuerySet: return "EmptyQuerySet";
    case ErrorKind::kOverlap: return "OverlapError";
    case ErrorKind::kPoolTooLarge: return "PoolTooLarge";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kMissingFile: return "MissingFile";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kZeroVector: return "ZeroVector";
    case ErrorKind::kEmptyBatch: return "EmptyBatch";
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::kMissingEntry: return "MissingEntry";
    case ErrorKind::kCardinalityUnsupported: return "CardinalityUnsupported";
    case ErrorKind::kChosenSetNotEnumerated: return "ChosenSetNotEnumerated";
    case ErrorKind::kProtocol: return "ProtocolError";
    case ErrorKind::kEvaluatorCrashed: return "EvaluatorCrashed";
    case ErrorKind::kTimeout: return "Timeout";
  }
  return "Unknown";
}

ErrorClass ClassOf(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
    case ErrorKind::kBadSplit:
    case ErrorKind::kBadK:
    case ErrorKind::kEmptyPool:
    case ErrorKind::kEmptyInput:
    case ErrorKind::kEmptyQuerySet:
    case ErrorKind::kOverlap:
    case ErrorKind::kPoolTooLarge:
      return ErrorClass::kUsage;
    case ErrorKind::kIndexOutOfRange:
    case ErrorKind::kMissingEntry:
    case ErrorKind::kCardinalityUnsupported:
    case ErrorKind::kProtocol:
    case ErrorKind::kEvaluatorCrashed:
    case ErrorKind::kTimeout:
      return ErrorClass::kOracle;
    default:
      return ErrorClass::kData;
  }
}

}  // namespace demoselect
