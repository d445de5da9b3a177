// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coreagent/action.hpp"

namespace coreagent::llm {

/// First balanced {...} span in `text` that parses as a JSON object (string
/// literals and code fences are tolerated).
std::optional<std::string> extract_json_object(std::string_view text);

/// Scores indexed by block id, normalised to sum to 1. Missing or unusable
/// entries score 0; a zero total falls back to uniform. Throws NoJsonFound.
std::vector<double> parse_ranking(std::string_view text, int block_count);

std::vector<double> uniform_scores(int block_count);

struct DecisionDraft {
  std::string current_task;
  int index = -1;
  ActionKind action = ActionKind::Tap;
  std::string input_text = "N/A";
};

enum class DecisionStatus {
  Ok,
  Insufficient,  // index -1: the model asks for more context
  Unparseable,
  Finished,      // bare FINISHED reply (only meaningful for planner-less modes)
};

struct DecisionParse {
  DecisionStatus status = DecisionStatus::Unparseable;
  DecisionDraft draft;
  std::string detail;
};

/// Never throws.
DecisionParse parse_decision(std::string_view text);

/// Case-insensitive action vocabulary: tap/click, longtap/long click, input/type.
std::optional<ActionKind> normalize_action(std::string_view name);

bool is_finished_reply(std::string_view text);

std::string_view trim(std::string_view s);

}  // namespace coreagent::llm
