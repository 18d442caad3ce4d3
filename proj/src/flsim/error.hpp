/**
 * Copyright 2026 The flsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FLSIM_ERROR_HPP_
#define FLSIM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace flsim {

// Configuration and precondition failures. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string &what) : std::invalid_argument(what) {}
};

// Failures while executing (numerics, I/O, data). Maps to CLI exit code 3.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string &what) : std::runtime_error(what) {}
};

// Malformed binary inputs (IDX, checkpoints).
class FormatError : public RuntimeError {
 public:
  enum class Kind { kWrongMagic, kTruncated, kCountMismatch, kIo, kVersion };
  FormatError(Kind kind, const std::string &what) : RuntimeError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace flsim

#endif  // FLSIM_ERROR_HPP_
