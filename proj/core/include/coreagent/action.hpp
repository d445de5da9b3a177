// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace coreagent {

enum class ActionKind { Tap, LongTap, Input, Scroll, Launch };

/// Prompt vocabulary: tap / longtap / input / scroll / launch.
std::string_view to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view s);

/// Device-side vocabulary: Click / LongClick / InputText / Scroll / LaunchApp.
std::string_view device_verb(ActionKind kind);

/// A device command. element_index addresses the current screen's element list;
/// x/y are filled from the element bounds for bridges that need coordinates.
struct Action {
  ActionKind kind = ActionKind::Tap;
  int element_index = -1;
  int x = 0;
  int y = 0;
  std::string text;       // input text
  std::string direction;  // scroll: "up" | "down"
  std::string app;        // launch target

  static Action tap(int index) { return {ActionKind::Tap, index, 0, 0, {}, {}, {}}; }
  static Action long_tap(int index) { return {ActionKind::LongTap, index, 0, 0, {}, {}, {}}; }
  static Action input(int index, std::string text) {
    return {ActionKind::Input, index, 0, 0, std::move(text), {}, {}};
  }
  static Action scroll(std::string direction = "down") {
    return {ActionKind::Scroll, -1, 0, 0, {}, std::move(direction), {}};
  }
  static Action launch(std::string app) { return {ActionKind::Launch, -1, 0, 0, {}, {}, std::move(app)}; }
};

/// Canonical one-line form used in transition tables: "tap 2", "input 5 08:00",
/// "scroll down", "launch com.example".
std::string canonical(const Action& action);

/// Inverse of canonical(). Throws SchemaMismatch on unknown verbs.
Action parse_action(std::string_view line);

}  // namespace coreagent
