// Copyright 2026 The a4d Authors. All Rights Reserved.
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

namespace a4d {

// Caller supplied a malformed tensor, box, or argument.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration file or flag value that cannot be honored.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A NaN or Inf showed up inside a recorded operation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be read, parsed, or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace a4d
