/* Copyright 2026 The kvadmit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <stdexcept>
#include <string>

namespace kvadmit {

// Bad or inconsistent configuration values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures while reading or writing artifacts.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Simulated clock exceeded the configured horizon.
class HorizonError : public std::runtime_error {
 public:
  explicit HorizonError(const std::string& msg) : std::runtime_error(msg) {}
};

// Comparison or report requested against a run set with no baseline.
class MissingBaseline : public std::runtime_error {
 public:
  explicit MissingBaseline(const std::string& msg) : std::runtime_error(msg) {}
};

// Controller told about an agent it does not consider active.
class UnknownAgent : public std::logic_error {
 public:
  explicit UnknownAgent(const std::string& msg) : std::logic_error(msg) {}
};

// unpin on a node whose pin count is already zero.
class UnpinUnderflow : public std::logic_error {
 public:
  explicit UnpinUnderflow(const std::string& msg) : std::logic_error(msg) {}
};

// Internal consistency check failed (fuzz/validation mode).
class InvariantViolation : public std::logic_error {
 public:
  explicit InvariantViolation(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace kvadmit
