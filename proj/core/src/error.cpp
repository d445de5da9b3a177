// SPDX-License-Identifier: Apache-2.0

#include "coreagent/error.hpp"

namespace coreagent {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedXml: return "MalformedXml";
    case ErrorKind::EmptyHierarchy: return "EmptyHierarchy";
    case ErrorKind::NoElements: return "NoElements";
    case ErrorKind::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorKind::Transport: return "Transport";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::AuthFailure: return "AuthFailure";
    case ErrorKind::ScriptMiss: return "ScriptMiss";
    case ErrorKind::NoJsonFound: return "NoJsonFound";
    case ErrorKind::UnparseableDecision: return "UnparseableDecision";
    case ErrorKind::ReplayDivergence: return "ReplayDivergence";
    case ErrorKind::BridgeTimeout: return "BridgeTimeout";
    case ErrorKind::EnvironmentFailure: return "EnvironmentFailure";
    case ErrorKind::BackendFailure: return "BackendFailure";
    case ErrorKind::EmptyDenominator: return "EmptyDenominator";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool is_backend_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Transport:
    case ErrorKind::Timeout:
    case ErrorKind::AuthFailure:
    case ErrorKind::ScriptMiss:
    case ErrorKind::BackendFailure:
      return true;
    default:
      return false;
  }
}

}  // namespace coreagent
