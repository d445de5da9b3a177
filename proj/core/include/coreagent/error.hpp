// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coreagent {

enum class ErrorKind {
  MalformedXml,
  EmptyHierarchy,
  NoElements,
  MissingPlaceholder,
  Transport,
  Timeout,
  AuthFailure,
  ScriptMiss,
  NoJsonFound,
  UnparseableDecision,
  ReplayDivergence,
  BridgeTimeout,
  EnvironmentFailure,
  BackendFailure,
  EmptyDenominator,
  SchemaMismatch,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI,
/// the runtime's outcome classification) can triage without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// True for failures that originate in a model backend rather than the device side.
bool is_backend_error(ErrorKind kind);

}  // namespace coreagent
