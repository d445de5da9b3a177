// SPDX-License-Identifier: Apache-2.0

#include "coreagent/response_parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "coreagent/error.hpp"

namespace coreagent::llm {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

namespace {

// End offset (exclusive) of the balanced object starting at `open`, or npos.
std::size_t balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

std::optional<json> first_object(std::string_view text) {
  for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    const auto end = balanced_end(text, open);
    if (end == std::string_view::npos) continue;
    auto parsed = json::parse(text.substr(open, end - open), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

std::optional<double> to_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s(trim(v.get<std::string>()));
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return d;
  }
  return std::nullopt;
}

std::optional<int> to_int(const json& v) {
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > 1'000'000'000u) return std::nullopt;
    return static_cast<int>(u);
  }
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i > 1'000'000'000 || i < -1'000'000'000) return std::nullopt;
    return static_cast<int>(i);
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 1e9) return static_cast<int>(d);
    return std::nullopt;
  }
  if (v.is_string()) {
    const auto s = trim(v.get_ref<const std::string&>());
    int out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return out;
  }
  return std::nullopt;
}

std::string lower_compact(std::string_view s) {
  std::string out;
  for (char c : trim(s)) {
    if (c == ' ' || c == '_' || c == '-') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

std::optional<std::string> extract_json_object(std::string_view text) {
  auto obj = first_object(text);
  if (!obj) return std::nullopt;
  return obj->dump();
}

std::vector<double> uniform_scores(int block_count) {
  return std::vector<double>(static_cast<std::size_t>(std::max(block_count, 0)),
                             block_count > 0 ? 1.0 / block_count : 0.0);
}

std::vector<double> parse_ranking(std::string_view text, int block_count) {
  if (block_count < 1) throw Error(ErrorKind::InvalidArgument, "block_count must be >= 1");
  auto obj = first_object(text);
  if (!obj) throw Error(ErrorKind::NoJsonFound, "no JSON object in ranking response");
  std::vector<double> scores(static_cast<std::size_t>(block_count), 0.0);
  for (const auto& [key, value] : obj->items()) {
    const auto k = trim(key);
    int id = 0;
    auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), id);
    if (ec != std::errc{} || ptr != k.data() + k.size() || id < 0 || id >= block_count) continue;
    const auto v = to_number(value);
    if (v && std::isfinite(*v) && *v > 0) scores[static_cast<std::size_t>(id)] = *v;
  }
  double sum = 0;
  for (double s : scores) sum += s;
  if (!(sum > 0) || !std::isfinite(sum)) return uniform_scores(block_count);
  for (double& s : scores) s /= sum;
  return scores;
}

std::optional<ActionKind> normalize_action(std::string_view name) {
  const auto a = lower_compact(name);
  if (a == "tap" || a == "click") return ActionKind::Tap;
  if (a == "longtap" || a == "longclick" || a == "longpress") return ActionKind::LongTap;
  if (a == "input" || a == "inputtext" || a == "type") return ActionKind::Input;
  return std::nullopt;
}

bool is_finished_reply(std::string_view text) { return lower_compact(text) == "finished"; }

DecisionParse parse_decision(std::string_view text) {
  DecisionParse out;
  if (is_finished_reply(text)) {
    out.status = DecisionStatus::Finished;
    return out;
  }
  auto obj = first_object(text);
  if (!obj) {
    out.detail = "no JSON object in decision response";
    return out;
  }
  if (auto it = obj->find("current_task"); it != obj->end() && it->is_string()) {
    out.draft.current_task = it->get<std::string>();
  }
  auto idx_it = obj->find("index");
  const auto index = idx_it == obj->end() ? std::nullopt : to_int(*idx_it);
  if (!index) {
    out.detail = "missing or non-integer index";
    return out;
  }
  out.draft.index = *index;
  if (*index < 0) {
    out.status = DecisionStatus::Insufficient;
    return out;
  }
  auto act_it = obj->find("action");
  const auto action = act_it != obj->end() && act_it->is_string() ? normalize_action(act_it->get<std::string>())
                                                                   : std::nullopt;
  if (!action) {
    out.detail = "missing or unknown action";
    return out;
  }
  out.draft.action = *action;
  if (*action == ActionKind::Input) {
    auto txt_it = obj->find("input_text");
    std::string txt;
    if (txt_it != obj->end()) {
      if (txt_it->is_string()) txt = txt_it->get<std::string>();
      else if (txt_it->is_number()) txt = txt_it->dump();
    }
    if (trim(txt).empty() || trim(txt) == "N/A") {
      out.detail = "input action without input_text";
      return out;
    }
    out.draft.input_text = txt;
  } else {
    out.draft.input_text = "N/A";
  }
  out.status = DecisionStatus::Ok;
  return out;
}

}  // namespace coreagent::llm
