// Copyright 2026 The salsa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SALSA_ERROR_HPP_
#define SALSA_ERROR_HPP_

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace salsa {

enum class ErrorKind {
  kDimension,
  kNumeric,
  kEncoding,
  kDecoding,
  kMapping,
  kLength,
  kConfiguration,
  kTemplate,
  kStructural,
  kArity,
  kRange,
  kFormat,
  kLabel,
  kCompatibility,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kEncoding: return "encoding error";
    case ErrorKind::kDecoding: return "decoding error";
    case ErrorKind::kMapping: return "mapping error";
    case ErrorKind::kLength: return "length error";
    case ErrorKind::kConfiguration: return "configuration error";
    case ErrorKind::kTemplate: return "template error";
    case ErrorKind::kStructural: return "structural error";
    case ErrorKind::kArity: return "arity error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kLabel: return "label error";
    case ErrorKind::kCompatibility: return "compatibility error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (notably the CLI) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream out;
  (out << ... << std::forward<Args>(args));
  return out.str();
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void raise(ErrorKind kind, Args&&... args) {
  throw Error(kind, detail::concat(std::forward<Args>(args)...));
}

}  // namespace salsa

#endif  // SALSA_ERROR_HPP_
