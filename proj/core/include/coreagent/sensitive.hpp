// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "coreagent/gateway.hpp"

namespace coreagent::metrics {

enum class SensitiveCategory {
  IdentityAccount,
  LocationSchedule,
  ContactsCommunication,
  MediaFiles,
  DeviceUsage,
  BehaviorPreferences,
  FinanceSecurity,
  Other,
};

inline constexpr std::size_t kCategoryCount = 8;
inline constexpr std::array<SensitiveCategory, kCategoryCount> kAllCategories = {
    SensitiveCategory::IdentityAccount,     SensitiveCategory::LocationSchedule, SensitiveCategory::ContactsCommunication,
    SensitiveCategory::MediaFiles,          SensitiveCategory::DeviceUsage,      SensitiveCategory::BehaviorPreferences,
    SensitiveCategory::FinanceSecurity,     SensitiveCategory::Other};

std::string_view to_string(SensitiveCategory c);
/// Table label, e.g. "Identity & Account".
std::string_view display_name(SensitiveCategory c);
std::optional<SensitiveCategory> category_from_string(std::string_view s);

/// Attribute values (text, description, id) of one rendered element.
std::vector<std::string> rendered_attribute_values(std::string_view rendering);

class SensitiveClassifier {
 public:
  virtual ~SensitiveClassifier() = default;
  /// nullopt = not sensitive.
  virtual std::optional<SensitiveCategory> classify(const std::string& rendering) = 0;
};

/// Ordered keyword rules; the first rule whose pattern matches any attribute
/// value wins, so every element lands in at most one category.
class RuleClassifier final : public SensitiveClassifier {
 public:
  struct Rule {
    SensitiveCategory category;
    std::string pattern;
    std::regex compiled;
  };

  explicit RuleClassifier(std::vector<Rule> rules) : rules_(std::move(rules)) {}

  /// {"version":1,"rules":[{"category":..., "patterns":[...]}]}. Throws SchemaMismatch.
  static RuleClassifier from_json(const nlohmann::json& doc);
  static RuleClassifier from_file(const std::filesystem::path& file);
  /// Same rule table as data/sensitive_rules.json.
  static RuleClassifier builtin();
  static const nlohmann::json& builtin_rules_json();

  std::optional<SensitiveCategory> classify(const std::string& rendering) override;
  [[nodiscard]] const std::vector<Rule>& rules() const { return rules_; }

 private:
  std::vector<Rule> rules_;
};

/// Asks a model backend for the category; answers are cached per rendering.
class LlmClassifier final : public SensitiveClassifier {
 public:
  LlmClassifier(const llm::Gateway& gateway, llm::Role role) : gateway_(gateway), role_(role) {}
  std::optional<SensitiveCategory> classify(const std::string& rendering) override;

  /// Parses a reply: a category name (any case, spaces and '&' ignored) or "None".
  static std::optional<SensitiveCategory> parse_reply(std::string_view reply);

 private:
  const llm::Gateway& gateway_;
  llm::Role role_;
  std::mutex mutex_;
  std::map<std::string, std::optional<SensitiveCategory>> cache_;
};

using CategoryCounts = std::array<std::int64_t, kCategoryCount>;

CategoryCounts count_categories(const std::vector<std::string>& renderings, SensitiveClassifier& classifier);

}  // namespace coreagent::metrics
