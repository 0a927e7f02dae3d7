// Copyright 2026 The clinidedup Authors.
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

#ifndef CLINIDEDUP_ERROR_HPP_
#define CLINIDEDUP_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace clinidedup {

// Process exit codes used by the command line tool.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kInternal = 4,
};

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept { return ExitCode::kInternal; }
};

// Invalid configuration or arguments, detected before any work is done.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

// Malformed or inconsistent input data, including I/O failures.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

}  // namespace clinidedup

#endif  // CLINIDEDUP_ERROR_HPP_
