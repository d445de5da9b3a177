// SPDX-License-Identifier: Apache-2.0

#include "coreagent/co_planning.hpp"

#include <future>
#include <spdlog/spdlog.h>

#include "coreagent/error.hpp"
#include "coreagent/response_parser.hpp"

namespace coreagent::planning {

std::string_view to_string(ConfirmKind kind) {
  switch (kind) {
    case ConfirmKind::Chosen: return "chosen";
    case ConfirmKind::Revised: return "revised";
    case ConfirmKind::Finished: return "finished";
  }
  return "";
}

ConfirmKind confirm_kind_from_string(std::string_view s) {
  if (s == "chosen") return ConfirmKind::Chosen;
  if (s == "revised") return ConfirmKind::Revised;
  if (s == "finished") return ConfirmKind::Finished;
  throw Error(ErrorKind::SchemaMismatch, "unknown sub-task kind '" + std::string(s) + "'");
}

namespace {

bool recoverable(ErrorKind kind) {
  return kind == ErrorKind::Transport || kind == ErrorKind::Timeout || kind == ErrorKind::BackendFailure;
}

}  // namespace

std::vector<SubtaskCandidate> generate_candidates(const llm::Gateway& gateway, std::string_view task,
                                                  std::string_view history, const blocks::Partition& partition,
                                                  std::vector<llm::Exchange>& log) {
  if (partition.blocks.empty()) throw Error(ErrorKind::NoElements, "co-planning needs at least one block");

  struct Outcome {
    llm::Exchange exchange;
    std::optional<Error> error;
  };

  std::vector<std::future<Outcome>> pending;
  pending.reserve(partition.blocks.size());
  for (const auto& block : partition.blocks) {
    llm::Bindings b{{std::string(llm::slot::kTask), std::string(task)},
                    {std::string(llm::slot::kHistory), std::string(history)},
                    {std::string(llm::slot::kBlockState), llm::format_block_state(block.renderings)}};
    std::string prompt = llm::render(llm::TemplateId::LocalSubtask, b);
    pending.push_back(std::async(std::launch::async, [&gateway, prompt = std::move(prompt)]() mutable -> Outcome {
      try {
        return Outcome{gateway.complete(llm::Role::Local, llm::TemplateId::LocalSubtask, prompt), std::nullopt};
      } catch (const Error& e) {
        if (!recoverable(e.kind())) throw;
        llm::Exchange ex;
        ex.role = llm::Role::Local;
        ex.template_id = llm::TemplateId::LocalSubtask;
        ex.digest = llm::script_digest(ex.role, ex.template_id, prompt);
        ex.prompt = std::move(prompt);
        ex.error = e.what();
        return Outcome{std::move(ex), e};
      }
    }));
  }

  // Collect every future before rethrowing so no task outlives the references it captured.
  std::vector<Outcome> outcomes;
  std::exception_ptr failure;
  for (auto& f : pending) {
    try {
      outcomes.push_back(f.get());
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<SubtaskCandidate> out;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& [ex, err] = outcomes[i];
    SubtaskCandidate c;
    c.block_id = partition.blocks[i].block_id;
    c.raw_response = ex.response;
    const auto text = llm::trim(ex.response);
    if (err || text.empty()) {
      c.text = std::string(kSentinelCandidate);
      c.flagged = true;
      if (err) spdlog::warn("sub-task generation failed for block {}: {}", c.block_id, err->what());
    } else {
      c.text = std::string(text);
    }
    log.push_back(std::move(ex));
    out.push_back(std::move(c));
  }
  return out;
}

ConfirmedSubtask classify_confirmation(std::string_view response, const std::vector<SubtaskCandidate>& candidates) {
  const auto text = llm::trim(response);
  if (llm::is_finished_reply(text)) return ConfirmedSubtask{ConfirmKind::Finished, "", std::nullopt};
  if (text.empty()) throw Error(ErrorKind::BackendFailure, "empty planner reply");
  for (const auto& c : candidates) {
    if (llm::trim(c.text) == text) return ConfirmedSubtask{ConfirmKind::Chosen, std::string(text), c.block_id};
  }
  return ConfirmedSubtask{ConfirmKind::Revised, std::string(text), std::nullopt};
}

ConfirmedSubtask confirm_subtask(const llm::Gateway& gateway, std::string_view task, std::string_view history,
                                 const std::vector<SubtaskCandidate>& candidates, std::vector<llm::Exchange>& log) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidArgument, "confirm_subtask needs candidates");
  std::vector<std::string> texts;
  texts.reserve(candidates.size());
  for (const auto& c : candidates) texts.push_back(c.text);
  llm::Bindings b{{std::string(llm::slot::kTask), std::string(task)},
                  {std::string(llm::slot::kHistory), std::string(history)},
                  {std::string(llm::slot::kCandidates), llm::format_candidates(texts)}};
  auto ex = gateway.complete(llm::Role::Cloud, llm::TemplateId::CloudConfirm,
                             llm::render(llm::TemplateId::CloudConfirm, b));
  const std::string response = ex.response;
  log.push_back(std::move(ex));
  return classify_confirmation(response, candidates);
}

}  // namespace coreagent::planning
