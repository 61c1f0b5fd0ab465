// include/mtsv/error.h

// Copyright 2026  The mtsv Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MTSV_ERROR_H_
#define MTSV_ERROR_H_

#include <stdexcept>
#include <string>

namespace mtsv {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File-system failures (missing directories, short reads, ...).
class IoError : public Error {
 public:
  using Error::Error;
};

/// A persisted file does not match the expected versioned format.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace mtsv

#endif  // MTSV_ERROR_H_
