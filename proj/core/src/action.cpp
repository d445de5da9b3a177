// SPDX-License-Identifier: Apache-2.0

#include "coreagent/action.hpp"

#include <charconv>

#include "coreagent/error.hpp"

namespace coreagent {

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Tap: return "tap";
    case ActionKind::LongTap: return "longtap";
    case ActionKind::Input: return "input";
    case ActionKind::Scroll: return "scroll";
    case ActionKind::Launch: return "launch";
  }
  return "";
}

ActionKind action_kind_from_string(std::string_view s) {
  for (auto k : {ActionKind::Tap, ActionKind::LongTap, ActionKind::Input, ActionKind::Scroll, ActionKind::Launch}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::SchemaMismatch, "unknown action kind '" + std::string(s) + "'");
}

std::string_view device_verb(ActionKind kind) {
  switch (kind) {
    case ActionKind::Tap: return "Click";
    case ActionKind::LongTap: return "LongClick";
    case ActionKind::Input: return "InputText";
    case ActionKind::Scroll: return "Scroll";
    case ActionKind::Launch: return "LaunchApp";
  }
  return "";
}

std::string canonical(const Action& action) {
  std::string out(to_string(action.kind));
  switch (action.kind) {
    case ActionKind::Tap:
    case ActionKind::LongTap:
      out += ' ' + std::to_string(action.element_index);
      break;
    case ActionKind::Input:
      out += ' ' + std::to_string(action.element_index) + ' ' + action.text;
      break;
    case ActionKind::Scroll:
      out += ' ' + (action.direction.empty() ? std::string("down") : action.direction);
      break;
    case ActionKind::Launch:
      out += ' ' + action.app;
      break;
  }
  return out;
}

namespace {

int parse_index(std::string_view s, std::string_view line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorKind::SchemaMismatch, "bad element index in action '" + std::string(line) + "'");
  }
  return v;
}

}  // namespace

Action parse_action(std::string_view line) {
  const auto sp = line.find(' ');
  const std::string_view verb = line.substr(0, sp);
  const std::string_view rest = sp == std::string_view::npos ? std::string_view{} : line.substr(sp + 1);
  if (verb == "tap") return Action::tap(parse_index(rest, line));
  if (verb == "longtap") return Action::long_tap(parse_index(rest, line));
  if (verb == "input") {
    const auto sp2 = rest.find(' ');
    const auto idx = parse_index(rest.substr(0, sp2), line);
    return Action::input(idx, sp2 == std::string_view::npos ? std::string{} : std::string(rest.substr(sp2 + 1)));
  }
  if (verb == "scroll") return Action::scroll(rest.empty() ? "down" : std::string(rest));
  if (verb == "launch") return Action::launch(std::string(rest));
  throw Error(ErrorKind::SchemaMismatch, "unknown action '" + std::string(line) + "'");
}

}  // namespace coreagent
