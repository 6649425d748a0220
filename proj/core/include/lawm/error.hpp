// Copyright 2026 The LAWM Authors
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

#ifndef LAWM_ERROR_HPP_
#define LAWM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace lawm {

// All library failures derive from Error so callers (the CLI in particular)
// can separate validated-input failures from internal faults.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape mismatch, wrong mode).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a density evaluated outside its support.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data. `offset` is the byte position where reading failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset content problems (missing rewards, empty corpus, I/O failures).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace lawm

#endif  // LAWM_ERROR_HPP_
