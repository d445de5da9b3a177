// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coreagent/gateway.hpp"
#include "coreagent/partition.hpp"

namespace coreagent::planning {

/// Stand-in for an empty or failed local answer.
inline constexpr std::string_view kSentinelCandidate = "no actionable step in this section";

struct SubtaskCandidate {
  int block_id = 0;
  std::string text;
  std::string raw_response;
  /// Set when `text` is the sentinel (empty reply or backend failure).
  bool flagged = false;
};

enum class ConfirmKind { Chosen, Revised, Finished };

std::string_view to_string(ConfirmKind kind);
ConfirmKind confirm_kind_from_string(std::string_view s);

struct ConfirmedSubtask {
  ConfirmKind kind = ConfirmKind::Revised;
  std::string text;
  std::optional<int> source_block;

  friend bool operator==(const ConfirmedSubtask&, const ConfirmedSubtask&) = default;
};

/// One local completion per block, each seeing only its own block. Calls run
/// concurrently (bounded by the gateway); exchanges are appended in block order.
std::vector<SubtaskCandidate> generate_candidates(const llm::Gateway& gateway, std::string_view task,
                                                  std::string_view history, const blocks::Partition& partition,
                                                  std::vector<llm::Exchange>& log);

/// One cloud completion over the candidate texts only. Backend errors propagate.
ConfirmedSubtask confirm_subtask(const llm::Gateway& gateway, std::string_view task, std::string_view history,
                                 const std::vector<SubtaskCandidate>& candidates, std::vector<llm::Exchange>& log);

/// Maps a raw planner reply onto chosen / revised / finished.
ConfirmedSubtask classify_confirmation(std::string_view response, const std::vector<SubtaskCandidate>& candidates);

}  // namespace coreagent::planning
