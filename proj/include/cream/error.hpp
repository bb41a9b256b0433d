// Copyright 2026 The CREAM Authors
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
#include <stdexcept>
#include <string>

namespace cream {

// Base for every error raised by the library. The CLI maps subclasses onto
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LexError : public Error {
 public:
  LexError(std::size_t offset, const std::string& what)
      : Error("lex error at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class EmptyVocab : public Error {
 public:
  EmptyVocab() : Error("identifier pool is empty") {}
};

class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error("dataset is empty") {}
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Invalid generator or experiment configuration. `field` names the offending
// key so callers can report it.
class SpecError : public Error {
 public:
  SpecError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class MisalignedSets : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cream
