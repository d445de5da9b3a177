// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coreagent/action.hpp"
#include "coreagent/gateway.hpp"
#include "coreagent/partition.hpp"

namespace coreagent::decision {

enum class RankingStrategy { Llm, BasicOrder, Random };

std::string_view to_string(RankingStrategy s);
RankingStrategy ranking_strategy_from_string(std::string_view s);

struct BlockRanking {
  /// Indexed by block id; sums to 1.
  std::vector<double> scores;
  /// Block ids by descending score, ties by ascending id.
  std::vector<int> order;
  /// True when the local reply could not be parsed and uniform scores were used.
  bool fallback = false;
};

BlockRanking ranking_from_scores(std::vector<double> scores);

/// Deterministic Fisher-Yates permutation of [0, n) for a given seed.
std::vector<int> seeded_permutation(int n, std::uint64_t seed);

/// Scores the blocks for the confirmed sub-task. With the Llm strategy this is
/// one local completion over the sectioned page (skipped for a single block).
BlockRanking rank_blocks(const llm::Gateway& gateway, std::string_view subtask, const blocks::Partition& partition,
                         RankingStrategy strategy, std::uint64_t seed, std::vector<llm::Exchange>& log);

struct Decision {
  int element_index = -1;
  ActionKind action = ActionKind::Tap;
  std::string input_text;  // empty unless action == Input
  int blocks_consumed = 0;
  std::string cloud_stated_subtask;

  friend bool operator==(const Decision&, const Decision&) = default;
};

struct Exhausted {
  int blocks_consumed = 0;
};

/// Planner-less modes only: the decider itself declared the task complete.
struct FinishedSignal {
  int blocks_consumed = 0;
};

struct AccumulationOptions {
  /// Carry earlier blocks forward into later rounds.
  bool accumulate = true;
  /// Allow more than the top-ranked block.
  bool multi_round = true;
  /// Treat a bare FINISHED reply as task completion.
  bool honor_finished = false;
  llm::TemplateId template_id = llm::TemplateId::CloudDecide;
  llm::Role role = llm::Role::Cloud;
};

struct AccumulationResult {
  std::variant<Decision, Exhausted, FinishedSignal> outcome;
  /// Blocks sent so far, a prefix of the ranking order.
  std::vector<int> uploaded;
  std::vector<std::string> notes;
};

/// Uploads blocks in ranking order, one more per round, until the cloud names an
/// element it has actually seen or the blocks run out.
AccumulationResult decide_with_accumulation(const llm::Gateway& gateway, std::string_view task,
                                            std::string_view history, const blocks::Partition& partition,
                                            const BlockRanking& ranking, const AccumulationOptions& options,
                                            std::vector<llm::Exchange>& log);

}  // namespace coreagent::decision
