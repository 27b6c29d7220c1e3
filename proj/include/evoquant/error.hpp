// Copyright 2026 The evoquant Authors.
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

namespace evoquant {

// Base class for every error raised by the library. Messages are short,
// lower-case and stable; tests and the CLI match on them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied something that violates a documented precondition or
// type invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or incompatible JSQW/JSQQ/CSV/JSON input.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem or stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// An evaluation could not produce a fitness (e.g. training diverged). The
// search loop retries these with a fresh mutation.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace evoquant
