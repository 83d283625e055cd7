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

#include <stdexcept>
#include <string>
#include <string_view>

namespace latg2p {

enum class ErrorCode {
  MalformedLine,
  EmptyAfterNormalization,
  InsufficientData,
  EmptyCorpus,
  UnknownId,
  ShapeMismatch,
  TargetOutOfRange,
  NotScalar,
  InvalidConfig,
  OddHeadDim,
  SequenceTooLong,
  CorruptCheckpoint,
  StepOutOfRange,
  NonFiniteLoss,
  LengthMismatch,
  EmptyReferenceSet,
  ZeroTrials,
  VocabMismatch,
  SplitMismatch,
  TooFewWords,
  UnknownLanguage,
  Io,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::EmptyAfterNormalization: return "EmptyAfterNormalization";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::OddHeadDim: return "OddHeadDim";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyReferenceSet: return "EmptyReferenceSet";
    case ErrorCode::ZeroTrials: return "ZeroTrials";
    case ErrorCode::VocabMismatch: return "VocabMismatch";
    case ErrorCode::SplitMismatch: return "SplitMismatch";
    case ErrorCode::TooFewWords: return "TooFewWords";
    case ErrorCode::UnknownLanguage: return "UnknownLanguage";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace latg2p
