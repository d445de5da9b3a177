// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "coreagent/run_log.hpp"
#include "coreagent/runtime.hpp"
#include "coreagent/sensitive.hpp"
#include "coreagent/task.hpp"

namespace coreagent::metrics {

/// Exact ratio num/den kept in lowest terms with den > 0.
class Fraction {
 public:
  /// Throws EmptyDenominator when den == 0.
  Fraction(std::int64_t num, std::int64_t den);

  [[nodiscard]] std::int64_t num() const { return num_; }
  [[nodiscard]] std::int64_t den() const { return den_; }
  [[nodiscard]] double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  /// "40.00%".
  [[nodiscard]] std::string percent(int decimals = 2) const;

  friend bool operator==(const Fraction&, const Fraction&) = default;

 private:
  std::int64_t num_;
  std::int64_t den_;
};

/// (baseline - ours) / baseline. Throws EmptyDenominator when baseline == 0.
Fraction reduction(std::int64_t baseline, std::int64_t ours);

struct PairedStep {
  std::string task_id;
  int ours_step = 0;
  int baseline_step = 0;
  std::string screen_hash;
  std::int64_t baseline_elements = 0;
  std::int64_t ours_elements = 0;
  bool decisions_equal = false;
};

/// Decision identity used for pairing and the subsequence oracle.
ActionKey action_key(const runtime::StepDecision& d);

/// Pairs each decided step of `ours` with the first unused decided step of
/// `baseline` on the same screen digest with an equal action triple.
std::vector<PairedStep> pair_steps(const runtime::Trace& baseline, const runtime::Trace& ours);
/// Pairs task by task (matched on task_id).
std::vector<PairedStep> pair_runs(const std::vector<runtime::Trace>& baseline, const std::vector<runtime::Trace>& ours);

/// Reduction over the pairs whose decisions are equal.
Fraction reduction_rate(const std::vector<PairedStep>& pairs);

/// Unpaired: every round of every task, pooled.
Fraction rr1(const std::vector<runtime::Trace>& baseline, const std::vector<runtime::Trace>& ours);
/// Uploaded over page total, restricted to pages split into more than one block.
Fraction rr2(const std::vector<runtime::Trace>& ours);
/// Uploaded over page total over every page.
Fraction rr3(const std::vector<runtime::Trace>& ours);

bool success_subsequence(const std::vector<ActionKey>& executed, const std::vector<ActionKey>& annotated);
bool success_key_elements(const std::vector<std::string>& visited_xmls, const std::vector<KeyElementMatcher>& matchers);

std::vector<ActionKey> executed_actions(const runtime::Trace& trace);
/// nullopt when the oracle is empty. With both oracle styles present, both must hold.
std::optional<bool> task_success(const runtime::Trace& trace, const TaskOracle& oracle);

/// Element renderings sent upstream by the agent, one entry per uploaded element per round.
std::vector<std::string> uploaded_renderings(const runtime::Trace& trace);

struct UsageReport {
  llm::TokenUsage local;
  llm::TokenUsage cloud;
  friend bool operator==(const UsageReport&, const UsageReport&) = default;
};

UsageReport usage_report(const std::vector<runtime::Trace>& traces);

struct CategoryRow {
  std::int64_t baseline = 0;
  std::int64_t ours = 0;
  std::optional<Fraction> reduction;  // empty when baseline == 0
  /// "70.49%" or "/".
  [[nodiscard]] std::string reduction_text() const;
};

CategoryRow make_row(std::int64_t baseline, std::int64_t ours);

struct SensitiveReport {
  std::array<CategoryRow, kCategoryCount> categories;
  CategoryRow total;
};

SensitiveReport sensitive_report(const std::vector<runtime::Trace>& baseline, const std::vector<runtime::Trace>& ours,
                                 SensitiveClassifier& classifier);

struct RunSummary {
  std::string mode;
  int tasks = 0;
  int judged = 0;
  int succeeded = 0;
  std::optional<Fraction> success_rate;
  std::int64_t uploaded_elements = 0;
  std::int64_t total_elements = 0;
  int steps = 0;
  UsageReport usage;
};

struct MetricsReport {
  RunSummary baseline;
  RunSummary ours;
  int paired_steps = 0;
  int ours_decided_steps = 0;
  /// Share of our decided steps that a baseline step matched; the observed
  /// counterpart of the decision-deviation bound.
  std::optional<Fraction> decision_agreement;
  std::optional<Fraction> rr;
  std::optional<Fraction> rr1;
  std::optional<Fraction> rr2;
  std::optional<Fraction> rr3;
  SensitiveReport sensitive;
};

/// Looks up <oracle_dir>/<task_id>/oracle/ (or <oracle_dir>/<task_id>/).
TaskOracle find_oracle(const std::filesystem::path& oracle_dir, const std::string& task_id);

MetricsReport evaluate(const runlog::RunData& baseline, const runlog::RunData& ours,
                       const std::optional<std::filesystem::path>& oracle_dir, SensitiveClassifier& classifier);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
/// Text tables: one in the shape of the per-method results table, one for
/// per-category sensitive exposure.
std::string render_report(const MetricsReport& report);

}  // namespace coreagent::metrics
