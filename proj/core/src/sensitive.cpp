// SPDX-License-Identifier: Apache-2.0

#include "coreagent/sensitive.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "coreagent/error.hpp"
#include "coreagent/prompts.hpp"
#include "coreagent/response_parser.hpp"

namespace coreagent::metrics {

using nlohmann::json;

std::string_view to_string(SensitiveCategory c) {
  switch (c) {
    case SensitiveCategory::IdentityAccount: return "IdentityAccount";
    case SensitiveCategory::LocationSchedule: return "LocationSchedule";
    case SensitiveCategory::ContactsCommunication: return "ContactsCommunication";
    case SensitiveCategory::MediaFiles: return "MediaFiles";
    case SensitiveCategory::DeviceUsage: return "DeviceUsage";
    case SensitiveCategory::BehaviorPreferences: return "BehaviorPreferences";
    case SensitiveCategory::FinanceSecurity: return "FinanceSecurity";
    case SensitiveCategory::Other: return "Other";
  }
  return "";
}

std::string_view display_name(SensitiveCategory c) {
  switch (c) {
    case SensitiveCategory::IdentityAccount: return "Identity & Account";
    case SensitiveCategory::LocationSchedule: return "Location & Schedule";
    case SensitiveCategory::ContactsCommunication: return "Contacts & Communication";
    case SensitiveCategory::MediaFiles: return "Media & Files";
    case SensitiveCategory::DeviceUsage: return "Device & Usage";
    case SensitiveCategory::BehaviorPreferences: return "Behavior & Preferences";
    case SensitiveCategory::FinanceSecurity: return "Finance & Security";
    case SensitiveCategory::Other: return "Other";
  }
  return "";
}

namespace {

std::string fold(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

std::optional<SensitiveCategory> category_from_string(std::string_view s) {
  const std::string key = fold(s);
  for (auto c : kAllCategories) {
    if (fold(to_string(c)) == key || fold(display_name(c)) == key) return c;
  }
  return std::nullopt;
}

std::vector<std::string> rendered_attribute_values(std::string_view rendering) {
  static const std::regex kAttr(R"re((?:text|description|id)="([^"]*)")re");
  std::vector<std::string> out;
  const std::string s(rendering);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kAttr); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1].str());
  }
  return out;
}

RuleClassifier RuleClassifier::from_json(const json& doc) {
  std::vector<Rule> rules;
  try {
    if (doc.at("version").get<int>() != 1) throw Error(ErrorKind::SchemaMismatch, "sensitive rules: unsupported version");
    for (const auto& r : doc.at("rules")) {
      const auto name = r.at("category").get<std::string>();
      const auto category = category_from_string(name);
      if (!category) throw Error(ErrorKind::SchemaMismatch, "sensitive rules: unknown category '" + name + "'");
      for (const auto& p : r.at("patterns")) {
        const auto pattern = p.get<std::string>();
        rules.push_back(Rule{*category, pattern, std::regex(pattern, std::regex::ECMAScript | std::regex::icase)});
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("sensitive rules: ") + e.what());
  } catch (const std::regex_error& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("sensitive rules: bad pattern: ") + e.what());
  }
  return RuleClassifier(std::move(rules));
}

RuleClassifier RuleClassifier::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::SchemaMismatch, "cannot open " + file.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, file.string() + ": " + e.what());
  }
}

const json& RuleClassifier::builtin_rules_json() {
  static const json doc = json::parse(
#include "sensitive_rules.inc"
  );
  return doc;
}

RuleClassifier RuleClassifier::builtin() { return from_json(builtin_rules_json()); }

std::optional<SensitiveCategory> RuleClassifier::classify(const std::string& rendering) {
  const auto values = rendered_attribute_values(rendering);
  for (const auto& rule : rules_) {
    for (const auto& v : values) {
      if (std::regex_search(v, rule.compiled)) return rule.category;
    }
  }
  return std::nullopt;
}

std::optional<SensitiveCategory> LlmClassifier::parse_reply(std::string_view reply) {
  const auto text = llm::trim(reply);
  if (fold(text) == "none") return std::nullopt;
  if (auto c = category_from_string(text)) return c;
  // Tolerate a sentence around the label: first category name mentioned wins.
  const std::string folded = fold(text);
  std::optional<SensitiveCategory> best;
  std::size_t best_pos = std::string::npos;
  for (auto c : kAllCategories) {
    const auto pos = folded.find(fold(to_string(c)));
    if (pos < best_pos) {
      best_pos = pos;
      best = c;
    }
  }
  return best;
}

std::optional<SensitiveCategory> LlmClassifier::classify(const std::string& rendering) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(rendering); it != cache_.end()) return it->second;
  }
  const auto prompt = llm::render(llm::TemplateId::SensitiveClassify, {{std::string(llm::slot::kElement), rendering}});
  const auto ex = gateway_.complete(role_, llm::TemplateId::SensitiveClassify, prompt);
  auto result = parse_reply(ex.response);
  std::lock_guard lock(mutex_);
  cache_.emplace(rendering, result);
  return result;
}

CategoryCounts count_categories(const std::vector<std::string>& renderings, SensitiveClassifier& classifier) {
  CategoryCounts counts{};
  for (const auto& r : renderings) {
    if (auto c = classifier.classify(r)) ++counts[static_cast<std::size_t>(*c)];
  }
  return counts;
}

}  // namespace coreagent::metrics
