// Copyright 2026 The MDER Authors.
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

namespace mder {

// Base of every error the library throws. kind() is a stable, machine
// readable name used by the command line tool.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

#define MDER_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(what) {}          \
    const char* kind() const noexcept override { return #Name; }     \
  };

MDER_DEFINE_ERROR(ConfigError)
MDER_DEFINE_ERROR(IoError)
MDER_DEFINE_ERROR(FormatError)
MDER_DEFINE_ERROR(AnnotationError)
MDER_DEFINE_ERROR(ShapeError)
MDER_DEFINE_ERROR(SizeError)
MDER_DEFINE_ERROR(LexiconError)
MDER_DEFINE_ERROR(VocabularyError)
MDER_DEFINE_ERROR(CountError)
MDER_DEFINE_ERROR(OracleSizeError)
MDER_DEFINE_ERROR(TrainingError)
MDER_DEFINE_ERROR(CheckpointError)

#undef MDER_DEFINE_ERROR

}  // namespace mder
