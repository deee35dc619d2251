// Copyright 2026 The MPC-CDSS Authors
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

#ifndef CDSS_ERROR_HPP_
#define CDSS_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdss {

enum class ErrorKind {
  kDivisionByZero,
  kModeMismatch,
  kArityError,
  kConfigError,
  kDealError,
  kOutOfPreprocessing,
  kConnectionLost,
  kConnectError,
  kDesyncAbort,
  kMacAbort,
  kFrameError,
  kNeedMoreBytes,
  kHandshakeError,
  kProtocolError,
  kValidationError,
  kIntegrityError,
  kCorruptDatabase,
  kIngestError,
  kQueryTimeout,
  kBenchInvalid,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDivisionByZero: return "DivisionByZero";
    case ErrorKind::kModeMismatch: return "ModeMismatch";
    case ErrorKind::kArityError: return "ArityError";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kDealError: return "DealError";
    case ErrorKind::kOutOfPreprocessing: return "OutOfPreprocessing";
    case ErrorKind::kConnectionLost: return "ConnectionLost";
    case ErrorKind::kConnectError: return "ConnectError";
    case ErrorKind::kDesyncAbort: return "DesyncAbort";
    case ErrorKind::kMacAbort: return "MacAbort";
    case ErrorKind::kFrameError: return "FrameError";
    case ErrorKind::kNeedMoreBytes: return "NeedMoreBytes";
    case ErrorKind::kHandshakeError: return "HandshakeError";
    case ErrorKind::kProtocolError: return "ProtocolError";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kIntegrityError: return "IntegrityError";
    case ErrorKind::kCorruptDatabase: return "CorruptDatabase";
    case ErrorKind::kIngestError: return "IngestError";
    case ErrorKind::kQueryTimeout: return "QueryTimeout";
    case ErrorKind::kBenchInvalid: return "BenchInvalid";
  }
  return "Unknown";
}

// Every failure in the library surfaces as a CdssError tagged with its kind,
// so callers (CLIs, the daemon) can map kinds onto exit codes and ABORT
// reasons without parsing messages.
class CdssError : public std::runtime_error {
 public:
  CdssError(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  // The message without the kind prefix, for re-wrapping.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw CdssError(kind, message);
}

}  // namespace cdss

#endif  // CDSS_ERROR_HPP_
