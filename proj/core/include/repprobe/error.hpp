// Copyright 2026 The repprobe Authors
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

namespace repprobe {

enum class ErrorKind {
  kFormat,       // bad magic or malformed document
  kCorruption,   // truncated or inconsistent payload
  kVersion,      // unknown dtype code
  kIo,           // filesystem failure
  kShape,        // dimension mismatch between operands
  kData,         // value outside its domain (NaN, out-of-range label, ...)
  kInput,        // empty or otherwise unusable input
  kDegenerate,   // rank-deficient sample, undefined match
  kUnsupported,  // operation not defined for these arguments
  kValidation,   // manifest failed validation
  kRender,       // palette cannot colorize a label
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace repprobe
