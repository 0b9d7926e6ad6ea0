// Copyright 2026 The tnad Authors. All Rights Reserved.
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

namespace tnad {

enum class ErrorKind {
  Dimension,      // mismatched axis extents
  Index,          // axis or site index out of range
  Config,         // invalid configuration or unsupported topology
  Parse,          // malformed input text
  Format,         // wrong magic / unreadable binary layout
  Io,             // file could not be opened or written
  Numeric,        // non-finite value or failed decomposition
  Degenerate,     // input that violates a positivity requirement
  PlanIntegrity,  // plan and model/mps disagree mid-execution
  Structural,     // inconsistent layers in a cascade
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

}  // namespace tnad
