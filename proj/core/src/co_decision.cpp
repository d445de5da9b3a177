// SPDX-License-Identifier: Apache-2.0

#include "coreagent/co_decision.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <spdlog/spdlog.h>

#include "coreagent/error.hpp"
#include "coreagent/response_parser.hpp"

namespace coreagent::decision {

std::string_view to_string(RankingStrategy s) {
  switch (s) {
    case RankingStrategy::Llm: return "llm";
    case RankingStrategy::BasicOrder: return "basic";
    case RankingStrategy::Random: return "random";
  }
  return "";
}

RankingStrategy ranking_strategy_from_string(std::string_view s) {
  if (s == "llm") return RankingStrategy::Llm;
  if (s == "basic" || s == "basic_order") return RankingStrategy::BasicOrder;
  if (s == "random") return RankingStrategy::Random;
  throw Error(ErrorKind::InvalidArgument, "unknown ranking strategy '" + std::string(s) + "'");
}

BlockRanking ranking_from_scores(std::vector<double> scores) {
  BlockRanking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  r.scores = std::move(scores);
  return r;
}

std::vector<int> seeded_permutation(int n, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(std::max(n, 0)));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    // Rejection sampling keeps the draw unbiased and independent of the
    // standard library's distribution implementation.
    const auto bound = static_cast<std::uint64_t>(i) + 1;
    const auto limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = 0;
    do {
      draw = rng();
    } while (draw >= limit);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(draw % bound)]);
  }
  return perm;
}

BlockRanking rank_blocks(const llm::Gateway& gateway, std::string_view subtask, const blocks::Partition& partition,
                         RankingStrategy strategy, std::uint64_t seed, std::vector<llm::Exchange>& log) {
  const int n = static_cast<int>(partition.blocks.size());
  if (n == 0) throw Error(ErrorKind::NoElements, "cannot rank an empty partition");
  switch (strategy) {
    case RankingStrategy::BasicOrder:
      return ranking_from_scores(llm::uniform_scores(n));
    case RankingStrategy::Random: {
      BlockRanking r;
      r.scores = llm::uniform_scores(n);
      r.order = seeded_permutation(n, seed);
      return r;
    }
    case RankingStrategy::Llm:
      break;
  }
  if (n == 1) return ranking_from_scores({1.0});

  std::vector<std::vector<std::string>> sections;
  sections.reserve(partition.blocks.size());
  for (const auto& b : partition.blocks) sections.push_back(b.renderings);
  llm::Bindings bindings{{std::string(llm::slot::kUiState), llm::format_sectioned_state(sections)},
                         {std::string(llm::slot::kSubtask), std::string(subtask)}};
  auto ex = gateway.complete(llm::Role::Local, llm::TemplateId::LocalRank,
                             llm::render(llm::TemplateId::LocalRank, bindings));
  BlockRanking ranking;
  try {
    ranking = ranking_from_scores(llm::parse_ranking(ex.response, n));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoJsonFound) throw;
    spdlog::warn("block ranking unparseable, using uniform scores: {}", e.what());
    ranking = ranking_from_scores(llm::uniform_scores(n));
    ranking.fallback = true;
    ex.error = e.what();
  }
  log.push_back(std::move(ex));
  return ranking;
}

AccumulationResult decide_with_accumulation(const llm::Gateway& gateway, std::string_view task,
                                            std::string_view history, const blocks::Partition& partition,
                                            const BlockRanking& ranking, const AccumulationOptions& options,
                                            std::vector<llm::Exchange>& log) {
  if (ranking.order.size() != partition.blocks.size()) {
    throw Error(ErrorKind::InvalidArgument, "ranking does not cover the partition");
  }
  AccumulationResult result;
  result.outcome = Exhausted{};
  const std::size_t max_rounds = options.multi_round ? ranking.order.size() : std::min<std::size_t>(1, ranking.order.size());

  for (std::size_t round = 0; round < max_rounds; ++round) {
    const int block_id = ranking.order[round];
    result.uploaded.push_back(block_id);
    const int consumed = static_cast<int>(result.uploaded.size());

    std::vector<std::string> context;
    std::set<int> in_scope;
    auto add_block = [&](int id) {
      const auto& b = partition.block(id);
      context.insert(context.end(), b.renderings.begin(), b.renderings.end());
      in_scope.insert(b.element_indices.begin(), b.element_indices.end());
    };
    if (options.accumulate) {
      for (int id : result.uploaded) add_block(id);
    } else {
      add_block(block_id);
    }

    llm::Bindings bindings{{std::string(llm::slot::kTask), std::string(task)},
                           {std::string(llm::slot::kHistory), std::string(history)},
                           {std::string(llm::slot::kBlockState), llm::format_block_state(context)}};
    auto ex = gateway.complete(options.role, options.template_id, llm::render(options.template_id, bindings));
    const auto parsed = llm::parse_decision(ex.response);
    log.push_back(std::move(ex));

    switch (parsed.status) {
      case llm::DecisionStatus::Ok:
        if (in_scope.count(parsed.draft.index) == 0) {
          result.notes.push_back("hallucinated-reference: index " + std::to_string(parsed.draft.index) +
                                 " not among uploaded elements (round " + std::to_string(consumed) + ")");
          spdlog::warn("{}", result.notes.back());
          continue;
        }
        result.outcome = Decision{parsed.draft.index, parsed.draft.action,
                                  parsed.draft.action == ActionKind::Input ? parsed.draft.input_text : "",
                                  consumed, parsed.draft.current_task};
        return result;
      case llm::DecisionStatus::Finished:
        if (options.honor_finished) {
          result.outcome = FinishedSignal{consumed};
          return result;
        }
        result.notes.push_back("unexpected FINISHED from decider (round " + std::to_string(consumed) + ")");
        continue;
      case llm::DecisionStatus::Insufficient:
        continue;
      case llm::DecisionStatus::Unparseable:
        result.notes.push_back("unparseable decision (round " + std::to_string(consumed) + "): " + parsed.detail);
        spdlog::warn("{}", result.notes.back());
        continue;
    }
  }
  result.outcome = Exhausted{static_cast<int>(result.uploaded.size())};
  return result;
}

}  // namespace coreagent::decision
