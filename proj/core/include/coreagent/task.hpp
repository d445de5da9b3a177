// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "coreagent/action.hpp"
#include "coreagent/ui_model.hpp"

namespace coreagent {

/// An element-level action with the target identified by attributes rather than
/// index, so it can be compared across runs.
struct ActionKey {
  ActionKind kind = ActionKind::Tap;
  ui::ElementIdentity target;
  std::string input_text;

  friend bool operator==(const ActionKey&, const ActionKey&) = default;
};

/// Trim, collapse inner whitespace and lowercase.
std::string normalize_input_text(std::string_view text);

/// kind + target triple + normalised input text.
bool same_action(const ActionKey& a, const ActionKey& b);

struct KeyElementMatcher {
  enum class Attribute { Text, ResourceId, ContentDesc };
  Attribute attribute = Attribute::Text;
  std::string value;
  bool regex = false;

  [[nodiscard]] bool matches(const ui::UiNode& node) const;
};

struct TaskOracle {
  std::optional<std::vector<ActionKey>> annotated_actions;
  std::optional<std::vector<KeyElementMatcher>> key_elements;

  [[nodiscard]] bool empty() const { return !annotated_actions && !key_elements; }
};

struct TaskSpec {
  std::string task_id;
  std::string app;
  std::string description;
  /// Package or activity to launch before the first step; empty = none.
  std::string launch;
  std::string initial_screen = "000";
  TaskOracle oracle;
};

/// Reads <dir>/task.yaml and the optional <dir>/oracle/ payloads. The task id
/// defaults to the directory name.
TaskSpec load_task(const std::filesystem::path& dir);

/// Reads actions.json / key_elements.json from an oracle directory.
TaskOracle load_oracle(const std::filesystem::path& oracle_dir);

/// Task directories (those containing task.yaml) under `root`, sorted by name.
std::vector<std::filesystem::path> list_task_dirs(const std::filesystem::path& root);

}  // namespace coreagent
