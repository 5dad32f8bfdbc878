// Copyright 2026 The Matchbox Authors
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

#include "matchbox/error.h"

namespace matchbox {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::MissingListFile: return "MissingListFile";
    case ErrorCode::UnknownClassDirectory: return "UnknownClassDirectory";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::ClipTooShort: return "ClipTooShort";
    case ErrorCode::SilentSignal: return "SilentSignal";
    case ErrorCode::SilentNoise: return "SilentNoise";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::NoGraph: return "NoGraph";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::LabelSetMismatch: return "LabelSetMismatch";
    case ErrorCode::EmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::TooFewTrials: return "TooFewTrials";
    case ErrorCode::EmptyNoisePool: return "EmptyNoisePool";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptTensor: return "CorruptTensor";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadArgument: return "BadArgument";
  }
  return "Unknown";
}

bool is_internal(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NoGraph:
    case ErrorCode::DegenerateBatch:
      return true;
    default:
      return false;
  }
}

}  // namespace matchbox
