// Copyright (c) 2026 The cbias Authors
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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cbias {

enum class ErrorCode {
  kIoFailure,
  kParseError,
  kInvalidArgument,
  kUntokenizablePhrase,
  kEmptyLexicon,
  kInvalidCursor,
  kMalformedDistribution,
  kScorerFailure,
  kHandshakeMismatch,
  kEmptyCorpus,
  kEmptyReference,
  kIdMismatch,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUntokenizablePhrase: return "UntokenizablePhrase";
    case ErrorCode::kEmptyLexicon: return "EmptyLexicon";
    case ErrorCode::kInvalidCursor: return "InvalidCursor";
    case ErrorCode::kMalformedDistribution: return "MalformedDistribution";
    case ErrorCode::kScorerFailure: return "ScorerFailure";
    case ErrorCode::kHandshakeMismatch: return "HandshakeMismatch";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kIdMismatch: return "IdMismatch";
  }
  return "Unknown";
}

// Every failure raised by the library. `location` is a 1-based line number
// for file parsing errors and a 0-based step index for decoding errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> location = std::nullopt)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        message_(message),
        location_(location) {}

  ErrorCode code() const { return code_; }
  // The message without the leading error-code name.
  const std::string& message() const { return message_; }
  std::optional<std::size_t> location() const { return location_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> location_;
};

}  // namespace cbias
