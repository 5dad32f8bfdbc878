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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace matchbox {

/// Failure classes surfaced by the library. The name of each enumerator is
/// the machine-readable tag printed by the command-line tool.
enum class ErrorCode {
  // audio-io
  MalformedHeader,
  UnsupportedEncoding,
  TruncatedData,
  // dataset
  MissingListFile,
  UnknownClassDirectory,
  EmptyClass,
  PoolTooSmall,
  UnknownLabel,
  // features
  ClipTooShort,
  // augment
  SilentSignal,
  SilentNoise,
  // nn-core / model
  ShapeMismatch,
  DegenerateBatch,
  NoGraph,
  InvalidConfig,
  // optim
  StepOutOfRange,
  NonFiniteGradient,
  LabelOutOfRange,
  // engine
  LabelSetMismatch,
  EmptyEvalSet,
  TooFewTrials,
  EmptyNoisePool,
  BadMagic,
  VersionMismatch,
  CorruptTensor,
  // misc
  Io,
  BadArgument,
};

std::string_view error_name(ErrorCode code);

/// True for codes that indicate a broken internal invariant rather than bad
/// user input or data.
bool is_internal(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace matchbox
