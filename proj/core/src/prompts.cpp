// SPDX-License-Identifier: Apache-2.0

#include "coreagent/prompts.hpp"

#include <array>

#include "coreagent/error.hpp"

namespace coreagent::llm {

namespace {

constexpr std::string_view kLocalSubtask = R"tpl(You are a Planner, skilled at analyzing mobile UI states and task progress. Given a task description, previous UI actions, and part of current UI state, your job is to provide the most appropriate current step instruction.

You receive the task description from the user: [Task].
The previously completed steps for the task include: [History].
This is one section of current UI state: [UI Block State].

You must give the current step instruction based on the given section of current UI state(others are masked for privacy), even if the section seems irrelevant. Your response should be a single, precise current step instruction, it can't involve precise UI element information but should involve a logic task explanation, focusing only on what needs to be done immediately in the current UI state to progress the task.)tpl";

constexpr std::string_view kCloudConfirm = R"tpl(You are a Planner, skilled at analyzing mobile UI states and task progress. Based on a whole task description and previous UI actions, you need to give the current step instruction focusing only on what needs to be done immediately. A weaker local LLM has generated several current step instructions based on different sections of current UI state. Due to its weaker ability and incomplete information, some of them may be wrong. You can't see any private UI state, but the weaker local LLM can. You can analyze based on its generated current step instructions.

You receive the task description from the user: [Task].
The previously completed steps for the task include: [History].
The weaker local LLM generated several current step instructions based on different part of current UI: [Sub-task Candidates].

You can choose a most appropriate one from them, if you think all of them are wrong, you can correct them and give a new correct current step instruction. Never output other explanations. If you think the task has been finished, output FINISHED only.)tpl";

constexpr std::string_view kLocalRank = R"tpl(You are a smartphone assistant to help users complete tasks by interacting with mobile apps. The current UI state is shown below. It is separated into several sections, and each section is composed by several UI elements.

Current UI state: [UI State]
Given a current task, and the sections of part of current UI state, your job is to score each section to judge the probability that it can solve or progress current task: [Sub-task].

In most time, elements grouped in one section are relevant. Sometimes, maybe only one UI element is most useful and other elements in the same section are irrelevant, this section should still be assigned high score.
Output json like {"0": "<score of section 0>", "1": "<score of section 1>", ...}, the score should be a float between 0 and 1 and sum up to 1. Also output your explanation briefly.)tpl";

constexpr std::string_view kCloudDecide = R"tpl(You are a smartphone assistant to help users complete tasks by interacting with mobile apps. Given the whole task, the previous UI actions, the content of current UI state(may be incomplete), you should first decide the current task. Then you need to decide which UI element in current UI state should be interacted.

Whole Task: [Task]
Previous UI actions: [History]
Current UI state: [UI Block State]

You should first give a current task. It should be a single, precise current step instruction, it can't involve precise UI element information but should involve a logic task explanation, focusing only on what needs to be done immediately in the current UI state to progress the task. But note that the current UI state may not be complete for privacy protection. First, you need to judge whether the information in the current UI state can help the current task. If not, set the index to `-1'. Your response should always be in the following JSON format:
{
    "current_task": "<a brief description of what to do at current step>",
    "index": "<an integer, representing the index number of the UI element to interact with for current task or -1 (if none of the elements in the current UI state is relevant to the task)>",
    "action": "tap, longtap or input",
    "input_text": "<input text (if action is `input') or `N/A' (if action is `tap' or `longtap')>"
})tpl";

// Whole-page prompt for the single-model baselines. The decision wording is
// shared with CloudDecide; the model additionally gets a way to end the task.
constexpr std::string_view kCloudBaseline = R"tpl(You are a smartphone assistant to help users complete tasks by interacting with mobile apps. Given the whole task, the previous UI actions, and the content of current UI state, you should first decide the current task. Then you need to decide which UI element in current UI state should be interacted.

Whole Task: [Task]
Previous UI actions: [History]
Current UI state: [UI Block State]

You should first give a current task. It should be a single, precise current step instruction, focusing only on what needs to be done immediately in the current UI state to progress the task. If none of the elements in the current UI state can help the current task, set the index to `-1'. If you think the task has been finished, output FINISHED only. Otherwise your response should always be in the following JSON format:
{
    "current_task": "<a brief description of what to do at current step>",
    "index": "<an integer, representing the index number of the UI element to interact with for current task or -1 (if none of the elements in the current UI state is relevant to the task)>",
    "action": "tap, longtap or input",
    "input_text": "<input text (if action is `input') or `N/A' (if action is `tap' or `longtap')>"
})tpl";

constexpr std::string_view kSensitiveClassify = R"tpl(You are auditing what personal information a mobile app screen reveals. Classify the UI element below into exactly one category:
IdentityAccount, LocationSchedule, ContactsCommunication, MediaFiles, DeviceUsage, BehaviorPreferences, FinanceSecurity, Other.
If the element reveals no personal or sensitive information, answer None.
Answer with the category name only.

UI element: [Element])tpl";

constexpr std::array<std::string_view, 7> kSlots = {slot::kCandidates, slot::kBlockState, slot::kSubtask, slot::kUiState,
                                                    slot::kHistory,    slot::kTask,       slot::kElement};

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::LocalSubtask: return "LocalSubtask";
    case TemplateId::CloudConfirm: return "CloudConfirm";
    case TemplateId::LocalRank: return "LocalRank";
    case TemplateId::CloudDecide: return "CloudDecide";
    case TemplateId::CloudBaseline: return "CloudBaseline";
    case TemplateId::SensitiveClassify: return "SensitiveClassify";
  }
  return "";
}

TemplateId template_from_name(std::string_view name) {
  for (auto id : {TemplateId::LocalSubtask, TemplateId::CloudConfirm, TemplateId::LocalRank, TemplateId::CloudDecide,
                  TemplateId::CloudBaseline, TemplateId::SensitiveClassify}) {
    if (template_name(id) == name) return id;
  }
  throw Error(ErrorKind::SchemaMismatch, "unknown template '" + std::string(name) + "'");
}

std::string_view template_body(TemplateId id) {
  switch (id) {
    case TemplateId::LocalSubtask: return kLocalSubtask;
    case TemplateId::CloudConfirm: return kCloudConfirm;
    case TemplateId::LocalRank: return kLocalRank;
    case TemplateId::CloudDecide: return kCloudDecide;
    case TemplateId::CloudBaseline: return kCloudBaseline;
    case TemplateId::SensitiveClassify: return kSensitiveClassify;
  }
  return {};
}

std::string render(TemplateId id, const Bindings& bindings) {
  const std::string_view body = template_body(id);
  std::string out;
  out.reserve(body.size() + 256);
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find('[', pos);
    if (open == std::string_view::npos) {
      out.append(body.substr(pos));
      break;
    }
    out.append(body.substr(pos, open - pos));
    bool matched = false;
    for (const auto name : kSlots) {
      if (body.compare(open + 1, name.size(), name) == 0 && open + 1 + name.size() < body.size() &&
          body[open + 1 + name.size()] == ']') {
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw Error(ErrorKind::MissingPlaceholder,
                      "template " + std::string(template_name(id)) + " needs [" + std::string(name) + "]");
        }
        out += it->second;
        pos = open + name.size() + 2;
        matched = true;
        break;
      }
    }
    if (!matched) {
      out += '[';
      pos = open + 1;
    }
  }
  return out;
}

std::string format_history(const std::vector<std::string>& entries) { return "[" + join(entries, ", ") + "]"; }

std::string format_candidates(const std::vector<std::string>& candidates) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out += std::to_string(i + 1);
    out += ". ";
    out += candidates[i];
    out += '\n';
  }
  out += ']';
  return out;
}

std::string format_block_state(const std::vector<std::string>& renderings) {
  return "\n" + join(renderings, "\n");
}

std::string format_sectioned_state(const std::vector<std::vector<std::string>>& sections) {
  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    out += "\nSection ";
    out += std::to_string(i);
    out += ':';
    for (const auto& line : sections[i]) {
      out += '\n';
      out += line;
    }
  }
  return out;
}

}  // namespace coreagent::llm
