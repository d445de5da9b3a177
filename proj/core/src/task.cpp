// SPDX-License-Identifier: Apache-2.0

#include "coreagent/task.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>

#include "coreagent/error.hpp"

namespace coreagent {

namespace fs = std::filesystem;
using nlohmann::json;

std::string normalize_input_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool same_action(const ActionKey& a, const ActionKey& b) {
  return a.kind == b.kind && a.target == b.target &&
         normalize_input_text(a.input_text) == normalize_input_text(b.input_text);
}

bool KeyElementMatcher::matches(const ui::UiNode& node) const {
  const std::string* field = nullptr;
  switch (attribute) {
    case Attribute::Text: field = &node.text; break;
    case Attribute::ResourceId: field = &node.resource_id; break;
    case Attribute::ContentDesc: field = &node.content_desc; break;
  }
  if (!regex) return *field == value;
  return std::regex_search(*field, std::regex(value));
}

namespace {

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::SchemaMismatch, "cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, file.string() + ": " + e.what());
  }
}

ActionKind element_action(const std::string& name, const fs::path& file) {
  if (name == "tap") return ActionKind::Tap;
  if (name == "longtap") return ActionKind::LongTap;
  if (name == "input") return ActionKind::Input;
  throw Error(ErrorKind::SchemaMismatch, file.string() + ": unknown action '" + name + "'");
}

}  // namespace

TaskOracle load_oracle(const fs::path& oracle_dir) {
  TaskOracle oracle;
  const auto actions_file = oracle_dir / "actions.json";
  if (fs::exists(actions_file)) {
    const json doc = read_json(actions_file);
    std::vector<ActionKey> actions;
    try {
      for (const auto& a : doc.at("actions")) {
        ActionKey key;
        key.kind = element_action(a.at("action").get<std::string>(), actions_file);
        key.target.text = a.value("text", "");
        key.target.content_desc = a.value("content_desc", "");
        key.target.resource_id = a.value("resource_id", "");
        key.input_text = a.value("input_text", "");
        actions.push_back(std::move(key));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaMismatch, actions_file.string() + ": " + e.what());
    }
    oracle.annotated_actions = std::move(actions);
  }
  const auto keys_file = oracle_dir / "key_elements.json";
  if (fs::exists(keys_file)) {
    const json doc = read_json(keys_file);
    std::vector<KeyElementMatcher> matchers;
    try {
      for (const auto& m : doc.at("key_elements")) {
        KeyElementMatcher matcher;
        const auto attr = m.at("attribute").get<std::string>();
        if (attr == "text") matcher.attribute = KeyElementMatcher::Attribute::Text;
        else if (attr == "resource-id") matcher.attribute = KeyElementMatcher::Attribute::ResourceId;
        else if (attr == "content-desc") matcher.attribute = KeyElementMatcher::Attribute::ContentDesc;
        else throw Error(ErrorKind::SchemaMismatch, keys_file.string() + ": unknown attribute '" + attr + "'");
        matcher.value = m.at("value").get<std::string>();
        matcher.regex = m.value("regex", false);
        matchers.push_back(std::move(matcher));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaMismatch, keys_file.string() + ": " + e.what());
    }
    oracle.key_elements = std::move(matchers);
  }
  return oracle;
}

TaskSpec load_task(const fs::path& dir) {
  const auto file = dir / "task.yaml";
  TaskSpec spec;
  try {
    const YAML::Node doc = YAML::LoadFile(file.string());
    spec.task_id = doc["task_id"] ? doc["task_id"].as<std::string>() : dir.filename().string();
    spec.app = doc["app"] ? doc["app"].as<std::string>() : "";
    spec.description = doc["description"] ? doc["description"].as<std::string>() : "";
    spec.launch = doc["launch"] ? doc["launch"].as<std::string>() : "";
    if (doc["initial_screen"]) spec.initial_screen = doc["initial_screen"].as<std::string>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::SchemaMismatch, file.string() + ": " + e.what());
  }
  if (spec.description.empty()) throw Error(ErrorKind::SchemaMismatch, file.string() + ": empty description");
  if (fs::is_directory(dir / "oracle")) spec.oracle = load_oracle(dir / "oracle");
  return spec;
}

std::vector<fs::path> list_task_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::SchemaMismatch, "not a directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "task.yaml")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace coreagent
