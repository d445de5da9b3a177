// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "coreagent/co_decision.hpp"
#include "coreagent/co_planning.hpp"
#include "coreagent/environment.hpp"
#include "coreagent/gateway.hpp"
#include "coreagent/task.hpp"
#include "coreagent/ui_model.hpp"

namespace coreagent::runtime {

enum class Mode { Core, CloudBaseline, LocalBaseline };

std::string_view to_string(Mode mode);

/// Ablation switches; each removes one piece of the collaborative pipeline.
struct Ablations {
  bool no_partition = false;    // equal three-way split instead of layout blocks
  bool no_coplanning = false;   // rank against the raw task, no sub-task
  bool single_block = false;    // one decision round with the top block only
  bool no_accumulation = false; // each round sees only the newest block
  decision::RankingStrategy ranking = decision::RankingStrategy::Llm;

  friend bool operator==(const Ablations&, const Ablations&) = default;
};

enum class GiveUpPolicy {
  FinishCheck,  // ask the planner once more; FINISHED ends cleanly, else exhausted
  SkipStep,     // move on to the next step
  Abort,        // end the task as exhausted
};

std::string_view to_string(GiveUpPolicy p);
GiveUpPolicy give_up_policy_from_string(std::string_view s);

struct RunConfig {
  Mode mode = Mode::Core;
  Ablations ablations;
  int step_limit = 15;
  int max_scrolls = 3;
  /// Merge layout blocks down to this many when > 0.
  int max_blocks = 0;
  int block_threshold = 3;
  bool blind_scroll = false;
  std::string scroll_direction = "down";
  GiveUpPolicy on_giveup = GiveUpPolicy::FinishCheck;
  std::uint64_t seed = 0;

  /// Parses "core", "cloud_baseline", "local_baseline" or a comma-separated
  /// list such as "core,no_accumulation,ranking=random".
  void apply_mode_string(std::string_view spec);
  [[nodiscard]] std::string mode_string() const;
};

enum class HistoryKind { Launch, Tap, LongTap, Input, Scroll, Finish };

std::string_view to_string(HistoryKind kind);
HistoryKind history_kind_from_string(std::string_view s);

struct HistoryEntry {
  int step = 0;
  HistoryKind kind = HistoryKind::Launch;
  std::string rendered;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

/// e.g. 'Click <button text="Add" index=2></button>'.
HistoryEntry make_history_entry(int step, const Action& action, const std::string& element_rendering);
HistoryEntry finish_entry(int step);

struct ParsedHistory {
  HistoryKind kind;
  std::optional<int> element_index;
};
ParsedHistory parse_history_entry(std::string_view rendered);

/// One run of the pipeline on one screen.
struct PassRecord {
  enum class Kind { Decision, Exhausted, Finished, FinishCheck };
  Kind kind = Kind::Exhausted;
  std::string screen_hash;
  int total_elements = 0;
  int uploaded_elements = 0;
  int blocks_total = 0;
  int blocks_consumed = 0;
  std::vector<int> uploaded_indices;
  std::vector<int> ranking_order;
  std::optional<planning::ConfirmedSubtask> subtask;

  friend bool operator==(const PassRecord&, const PassRecord&) = default;
};

std::string_view to_string(PassRecord::Kind kind);
PassRecord::Kind pass_kind_from_string(std::string_view s);

struct StepDecision {
  decision::Decision decision;
  ui::ElementIdentity target;
  std::string target_rendering;

  friend bool operator==(const StepDecision&, const StepDecision&) = default;
};

struct StepRecord {
  int step = 0;
  /// Screen the step ended on.
  std::string screen_hash;
  /// Sums over the counted passes of this step.
  int total_elements = 0;
  int uploaded_elements = 0;
  int blocks_total = 0;
  int blocks_consumed = 0;
  std::optional<planning::ConfirmedSubtask> subtask;
  std::optional<StepDecision> decision;
  int scrolls_used = 0;
  llm::TokenUsage local_usage;
  llm::TokenUsage cloud_usage;
  std::vector<PassRecord> passes;
  std::vector<std::string> notes;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

enum class Outcome { Finished, StepLimit, Exhausted, Error };

std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct VisitedScreen {
  std::string digest;       // canonical element digest
  std::string source_hash;  // raw XML digest
  std::string xml;
};

struct TranscriptEntry {
  int step = 0;
  int pass = 0;
  llm::Exchange exchange;
};

struct Trace {
  TaskSpec task;
  std::vector<StepRecord> steps;
  std::vector<HistoryEntry> history;
  Outcome outcome = Outcome::Error;
  std::string error_kind;
  std::string error_message;
  std::vector<VisitedScreen> visited_screens;
  std::vector<TranscriptEntry> transcript;
};

/// Resolved screen state used inside a step.
struct ScreenState {
  std::string xml;
  ui::UiTree tree;
};

struct ScrollAttempt {
  std::optional<ScreenState> screen;  // empty = give up
  bool acted = false;                 // a scroll command was sent
};

/// One bounded scroll attempt: gives up without touching the device when the page
/// has nothing scrollable (unless blind scrolling is enabled) and gives up after
/// scrolling when the screen did not change.
ScrollAttempt scroll_fallback(Environment& env, const ScreenState& current, const RunConfig& cfg);

/// The outer loop: capture, partition, co-plan, co-decide, execute, repeat.
Trace run_task(const TaskSpec& spec, Environment& env, const llm::Gateway& gateway, const RunConfig& cfg);

/// Per-task seed for random ranking, independent of scheduling order.
std::uint64_t step_seed(std::uint64_t run_seed, const std::string& task_id, int step, int pass);

}  // namespace coreagent::runtime
