// Copyright 2026 The tumorseg Authors
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

#include "tumorseg/error.hpp"

namespace tumorseg {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kIo: return "i/o failure";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kDimensionality: return "wrong dimensionality";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kConfig: return "invalid config";
    case ErrorCode::kUndefinedMetric: return "undefined metric";
    case ErrorCode::kNumerical: return "numerical failure";
    case ErrorCode::kUnavailable: return "unavailable";
  }
  return "unknown";
}

}  // namespace tumorseg
