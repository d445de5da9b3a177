// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "coreagent/action.hpp"
#include "coreagent/gateway.hpp"

namespace coreagent::testkit {

/// Source tree directory holding fixtures/ and golden/.
std::filesystem::path test_data_dir();
std::filesystem::path fixture_tasks_dir();
std::filesystem::path fixture_scripts_dir();

struct PlanStep {
  std::string subtask;
  /// Substring identifying the target element's rendering.
  std::string target;
  ActionKind action = ActionKind::Tap;
  std::string input_text;
};

struct TaskPlan {
  std::string description;
  std::vector<PlanStep> steps;
};

/// Plans for the Clock fixture tasks.
std::vector<TaskPlan> clock_plans();

/// Rule-based stand-in for both models. It recovers the task, progress and
/// visible elements from the rendered prompt and answers the way a competent
/// model would: candidates name the plan step only for the block holding its
/// target, the ranker favours that block, the decider answers -1 until the
/// target is in context, and FINISHED is returned once every step is done.
class PlanResponder {
 public:
  explicit PlanResponder(std::vector<TaskPlan> plans) : plans_(std::move(plans)) {}
  std::string operator()(const llm::CompletionRequest& request) const;

 private:
  const TaskPlan* plan_for_description(const std::string& description) const;
  std::string decide(const TaskPlan& plan, const std::string& history, const std::string& state) const;

  std::vector<TaskPlan> plans_;
};

std::shared_ptr<llm::ChatBackend> make_plan_backend(std::vector<TaskPlan> plans = clock_plans());

/// Text between `open` and the first following `close`; empty when absent.
std::string between(const std::string& text, const std::string& open, const std::string& close);

/// Number of element actions in a rendered history binding.
int completed_steps(const std::string& history);

}  // namespace coreagent::testkit
