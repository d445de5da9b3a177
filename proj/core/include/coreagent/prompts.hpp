// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace coreagent::llm {

enum class TemplateId {
  LocalSubtask,   // local: one sub-task candidate for one block
  CloudConfirm,   // cloud: pick / revise a candidate, or FINISHED
  LocalRank,      // local: score every block for the confirmed sub-task
  CloudDecide,    // cloud: element + action from the uploaded blocks
  CloudBaseline,  // single-model baselines: whole page, may answer FINISHED
  SensitiveClassify,  // optional classifier for exposure accounting
};

std::string_view template_name(TemplateId id);
TemplateId template_from_name(std::string_view name);

/// Raw template text with its bracketed placeholder tokens.
std::string_view template_body(TemplateId id);

namespace slot {
inline constexpr std::string_view kTask = "Task";
inline constexpr std::string_view kHistory = "History";
inline constexpr std::string_view kBlockState = "UI Block State";
inline constexpr std::string_view kUiState = "UI State";
inline constexpr std::string_view kSubtask = "Sub-task";
inline constexpr std::string_view kCandidates = "Sub-task Candidates";
inline constexpr std::string_view kElement = "Element";
}  // namespace slot

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Substitutes every placeholder of the template in one pass (values are never
/// re-scanned). Throws MissingPlaceholder when a slot has no binding.
std::string render(TemplateId id, const Bindings& bindings);

/// "[entry, entry, ...]"; "[]" when empty.
std::string format_history(const std::vector<std::string>& entries);

/// Numbered candidate list, one per line, in the given order.
std::string format_candidates(const std::vector<std::string>& candidates);

/// Block contents for a single-section or accumulated state binding.
std::string format_block_state(const std::vector<std::string>& renderings);

/// All sections with their ids, for the ranking prompt.
std::string format_sectioned_state(const std::vector<std::vector<std::string>>& sections);

}  // namespace coreagent::llm
