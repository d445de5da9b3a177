// SPDX-License-Identifier: Apache-2.0

#include "coreagent/metrics.hpp"

#include <cstdarg>
#include <cstdio>
#include <map>
#include <numeric>

#include "coreagent/error.hpp"
#include "coreagent/ui_model.hpp"

namespace coreagent::metrics {

namespace fs = std::filesystem;
using nlohmann::json;
using runtime::PassRecord;
using runtime::Trace;

Fraction::Fraction(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error(ErrorKind::EmptyDenominator, "ratio with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = g == 0 ? 0 : num / g;
  den_ = g == 0 ? 1 : den / g;
}

std::string Fraction::percent(int decimals) const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f%%", decimals, value() * 100.0);
  return buf;
}

Fraction reduction(std::int64_t baseline, std::int64_t ours) { return Fraction(baseline - ours, baseline); }

ActionKey action_key(const runtime::StepDecision& d) {
  return ActionKey{d.decision.action, d.target, d.decision.input_text};
}

std::vector<PairedStep> pair_steps(const Trace& baseline, const Trace& ours) {
  std::vector<PairedStep> out;
  std::vector<bool> used(baseline.steps.size(), false);
  for (const auto& o : ours.steps) {
    if (!o.decision) continue;
    const ActionKey ok = action_key(*o.decision);
    for (std::size_t i = 0; i < baseline.steps.size(); ++i) {
      const auto& b = baseline.steps[i];
      if (used[i] || !b.decision || b.screen_hash != o.screen_hash) continue;
      if (!same_action(action_key(*b.decision), ok)) continue;
      used[i] = true;
      out.push_back(PairedStep{ours.task.task_id, o.step, b.step, o.screen_hash, b.uploaded_elements,
                               o.uploaded_elements, true});
      break;
    }
  }
  return out;
}

std::vector<PairedStep> pair_runs(const std::vector<Trace>& baseline, const std::vector<Trace>& ours) {
  std::map<std::string, const Trace*> by_id;
  for (const auto& t : baseline) by_id[t.task.task_id] = &t;
  std::vector<const Trace*> ordered;
  for (const auto& t : ours) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(),
            [](const Trace* a, const Trace* b) { return a->task.task_id < b->task.task_id; });
  std::vector<PairedStep> out;
  for (const Trace* o : ordered) {
    const auto it = by_id.find(o->task.task_id);
    if (it == by_id.end()) continue;
    auto pairs = pair_steps(*it->second, *o);
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  return out;
}

Fraction reduction_rate(const std::vector<PairedStep>& pairs) {
  std::int64_t b = 0;
  std::int64_t o = 0;
  for (const auto& p : pairs) {
    if (!p.decisions_equal) continue;
    b += p.baseline_elements;
    o += p.ours_elements;
  }
  if (b == 0) throw Error(ErrorKind::EmptyDenominator, "no baseline elements in paired steps");
  return reduction(b, o);
}

Fraction rr1(const std::vector<Trace>& baseline, const std::vector<Trace>& ours) {
  std::int64_t b = 0;
  std::int64_t o = 0;
  for (const auto& t : baseline) {
    for (const auto& s : t.steps) b += s.uploaded_elements;
  }
  for (const auto& t : ours) {
    for (const auto& s : t.steps) o += s.uploaded_elements;
  }
  if (b == 0) throw Error(ErrorKind::EmptyDenominator, "RR-1: baseline uploaded nothing");
  return reduction(b, o);
}

namespace {

// Passes that reached the decision stage; planner-only passes upload nothing.
bool decision_stage(const PassRecord& p) { return p.kind != PassRecord::Kind::FinishCheck && p.blocks_consumed > 0; }

Fraction page_reduction(const std::vector<Trace>& ours, bool multi_block_only, const char* label) {
  std::int64_t total = 0;
  std::int64_t uploaded = 0;
  for (const auto& t : ours) {
    for (const auto& s : t.steps) {
      for (const auto& p : s.passes) {
        if (!decision_stage(p)) continue;
        if (multi_block_only && p.blocks_total <= 1) continue;
        total += p.total_elements;
        uploaded += p.uploaded_elements;
      }
    }
  }
  if (total == 0) throw Error(ErrorKind::EmptyDenominator, std::string(label) + ": no qualifying pages");
  return reduction(total, uploaded);
}

}  // namespace

Fraction rr2(const std::vector<Trace>& ours) { return page_reduction(ours, true, "RR-2"); }
Fraction rr3(const std::vector<Trace>& ours) { return page_reduction(ours, false, "RR-3"); }

bool success_subsequence(const std::vector<ActionKey>& executed, const std::vector<ActionKey>& annotated) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < executed.size() && j < annotated.size(); ++i) {
    if (same_action(executed[i], annotated[j])) ++j;
  }
  return j == annotated.size();
}

namespace {

bool any_node(const ui::UiNode& node, const KeyElementMatcher& m) {
  if (m.matches(node)) return true;
  for (const auto& c : node.children) {
    if (any_node(c, m)) return true;
  }
  return false;
}

}  // namespace

bool success_key_elements(const std::vector<std::string>& visited_xmls, const std::vector<KeyElementMatcher>& matchers) {
  std::vector<ui::UiTree> trees;
  for (const auto& xml : visited_xmls) {
    try {
      trees.push_back(ui::parse_hierarchy(xml));
    } catch (const Error&) {
      // An unreadable dump covers nothing.
    }
  }
  for (const auto& m : matchers) {
    bool found = false;
    for (const auto& t : trees) {
      if (any_node(t.root(), m)) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

std::vector<ActionKey> executed_actions(const Trace& trace) {
  std::vector<ActionKey> out;
  for (const auto& s : trace.steps) {
    if (s.decision) out.push_back(action_key(*s.decision));
  }
  return out;
}

std::optional<bool> task_success(const Trace& trace, const TaskOracle& oracle) {
  if (oracle.empty()) return std::nullopt;
  bool ok = true;
  if (oracle.annotated_actions) ok = ok && success_subsequence(executed_actions(trace), *oracle.annotated_actions);
  if (oracle.key_elements) {
    std::vector<std::string> xmls;
    for (const auto& v : trace.visited_screens) xmls.push_back(v.xml);
    ok = ok && success_key_elements(xmls, *oracle.key_elements);
  }
  return ok;
}

std::vector<std::string> uploaded_renderings(const Trace& trace) {
  std::map<std::string, ui::UiTree> screens;
  for (const auto& v : trace.visited_screens) {
    if (!screens.count(v.digest)) screens.emplace(v.digest, ui::parse_hierarchy(v.xml));
  }
  std::vector<std::string> out;
  for (const auto& s : trace.steps) {
    for (const auto& p : s.passes) {
      if (p.kind == PassRecord::Kind::FinishCheck || p.uploaded_indices.empty()) continue;
      const auto it = screens.find(p.screen_hash);
      if (it == screens.end()) {
        throw Error(ErrorKind::SchemaMismatch,
                    trace.task.task_id + " step " + std::to_string(s.step) + ": screen " + p.screen_hash + " not recorded");
      }
      for (int idx : p.uploaded_indices) {
        const ui::UiElement* e = it->second.element(idx);
        if (e == nullptr) {
          throw Error(ErrorKind::SchemaMismatch, trace.task.task_id + ": uploaded index " + std::to_string(idx) +
                                                     " outside screen " + p.screen_hash);
        }
        out.push_back(e->rendered);
      }
    }
  }
  return out;
}

UsageReport usage_report(const std::vector<Trace>& traces) {
  UsageReport r;
  for (const auto& t : traces) {
    for (const auto& s : t.steps) {
      r.local += s.local_usage;
      r.cloud += s.cloud_usage;
    }
  }
  return r;
}

std::string CategoryRow::reduction_text() const { return reduction ? reduction->percent(2) : std::string("/"); }

CategoryRow make_row(std::int64_t baseline, std::int64_t ours) {
  CategoryRow row{baseline, ours, std::nullopt};
  if (baseline != 0) row.reduction = metrics::reduction(baseline, ours);
  return row;
}

SensitiveReport sensitive_report(const std::vector<Trace>& baseline, const std::vector<Trace>& ours,
                                 SensitiveClassifier& classifier) {
  auto count = [&](const std::vector<Trace>& traces) {
    CategoryCounts total{};
    for (const auto& t : traces) {
      const auto c = count_categories(uploaded_renderings(t), classifier);
      for (std::size_t i = 0; i < kCategoryCount; ++i) total[i] += c[i];
    }
    return total;
  };
  const auto b = count(baseline);
  const auto o = count(ours);
  SensitiveReport report;
  std::int64_t bt = 0;
  std::int64_t ot = 0;
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    report.categories[i] = make_row(b[i], o[i]);
    bt += b[i];
    ot += o[i];
  }
  report.total = make_row(bt, ot);
  return report;
}

TaskOracle find_oracle(const fs::path& oracle_dir, const std::string& task_id) {
  const auto nested = oracle_dir / task_id / "oracle";
  if (fs::is_directory(nested)) return load_oracle(nested);
  if (fs::is_directory(oracle_dir / task_id)) return load_oracle(oracle_dir / task_id);
  return {};
}

namespace {

template <typename Fn>
std::optional<Fraction> defined(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyDenominator) throw;
    return std::nullopt;
  }
}

RunSummary summarize(const runlog::RunData& run, const std::optional<fs::path>& oracle_dir) {
  RunSummary s;
  s.mode = run.manifest.mode;
  s.tasks = static_cast<int>(run.traces.size());
  for (const auto& t : run.traces) {
    for (const auto& step : t.steps) {
      s.uploaded_elements += step.uploaded_elements;
      s.total_elements += step.total_elements;
    }
    s.steps += static_cast<int>(t.steps.size());
    if (!oracle_dir) continue;
    if (auto ok = task_success(t, find_oracle(*oracle_dir, t.task.task_id))) {
      ++s.judged;
      if (*ok) ++s.succeeded;
    }
  }
  if (s.judged > 0) s.success_rate = Fraction(s.succeeded, s.judged);
  s.usage = usage_report(run.traces);
  return s;
}

}  // namespace

MetricsReport evaluate(const runlog::RunData& baseline, const runlog::RunData& ours,
                       const std::optional<fs::path>& oracle_dir, SensitiveClassifier& classifier) {
  MetricsReport r;
  r.baseline = summarize(baseline, oracle_dir);
  r.ours = summarize(ours, oracle_dir);
  const auto pairs = pair_runs(baseline.traces, ours.traces);
  r.paired_steps = static_cast<int>(pairs.size());
  for (const auto& t : ours.traces) {
    for (const auto& s : t.steps) r.ours_decided_steps += s.decision ? 1 : 0;
  }
  if (r.ours_decided_steps > 0) r.decision_agreement = Fraction(r.paired_steps, r.ours_decided_steps);
  r.rr = defined([&] { return reduction_rate(pairs); });
  r.rr1 = defined([&] { return rr1(baseline.traces, ours.traces); });
  r.rr2 = defined([&] { return rr2(ours.traces); });
  r.rr3 = defined([&] { return rr3(ours.traces); });
  r.sensitive = sensitive_report(baseline.traces, ours.traces, classifier);
  return r;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json fraction_json(const std::optional<Fraction>& f) {
  if (!f) return nullptr;
  return {{"num", f->num()}, {"den", f->den()}, {"value", f->value()}, {"percent", f->percent(2)}};
}

std::optional<Fraction> fraction_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return Fraction(j.at("num").get<std::int64_t>(), j.at("den").get<std::int64_t>());
}

json usage_json(const llm::TokenUsage& u) {
  return {{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens},
          {"wall_seconds", u.wall_seconds}};
}

llm::TokenUsage usage_from(const json& j) {
  return llm::TokenUsage{j.at("prompt_tokens").get<std::int64_t>(), j.at("completion_tokens").get<std::int64_t>(),
                         j.at("wall_seconds").get<double>()};
}

json summary_json(const RunSummary& s) {
  return {{"mode", s.mode},
          {"tasks", s.tasks},
          {"judged", s.judged},
          {"succeeded", s.succeeded},
          {"success_rate", fraction_json(s.success_rate)},
          {"uploaded_elements", s.uploaded_elements},
          {"total_elements", s.total_elements},
          {"steps", s.steps},
          {"usage", {{"local", usage_json(s.usage.local)}, {"cloud", usage_json(s.usage.cloud)}}}};
}

RunSummary summary_from(const json& j) {
  RunSummary s;
  s.mode = j.at("mode").get<std::string>();
  s.tasks = j.at("tasks").get<int>();
  s.judged = j.at("judged").get<int>();
  s.succeeded = j.at("succeeded").get<int>();
  s.success_rate = fraction_from(j.at("success_rate"));
  s.uploaded_elements = j.at("uploaded_elements").get<std::int64_t>();
  s.total_elements = j.at("total_elements").get<std::int64_t>();
  s.steps = j.at("steps").get<int>();
  s.usage.local = usage_from(j.at("usage").at("local"));
  s.usage.cloud = usage_from(j.at("usage").at("cloud"));
  return s;
}

json row_json(const CategoryRow& r) {
  return {{"baseline", r.baseline}, {"ours", r.ours}, {"reduction", fraction_json(r.reduction)}};
}

CategoryRow row_from(const json& j) {
  return CategoryRow{j.at("baseline").get<std::int64_t>(), j.at("ours").get<std::int64_t>(),
                     fraction_from(j.at("reduction"))};
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

std::string pct(const std::optional<Fraction>& f) { return f ? f->percent(2) : std::string("n/a"); }

}  // namespace

json report_to_json(const MetricsReport& r) {
  json categories = json::object();
  for (auto c : kAllCategories) categories[std::string(to_string(c))] = row_json(r.sensitive.categories[static_cast<std::size_t>(c)]);
  return {{"schema_version", runlog::kSchemaVersion},
          {"baseline", summary_json(r.baseline)},
          {"ours", summary_json(r.ours)},
          {"paired_steps", r.paired_steps},
          {"ours_decided_steps", r.ours_decided_steps},
          {"decision_agreement", fraction_json(r.decision_agreement)},
          {"rr", fraction_json(r.rr)},
          {"rr1", fraction_json(r.rr1)},
          {"rr2", fraction_json(r.rr2)},
          {"rr3", fraction_json(r.rr3)},
          {"sensitive", {{"categories", categories}, {"total", row_json(r.sensitive.total)}}}};
}

MetricsReport report_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != runlog::kSchemaVersion) {
      throw Error(ErrorKind::SchemaMismatch, "report: unsupported schema_version");
    }
    MetricsReport r;
    r.baseline = summary_from(j.at("baseline"));
    r.ours = summary_from(j.at("ours"));
    r.paired_steps = j.at("paired_steps").get<int>();
    r.ours_decided_steps = j.at("ours_decided_steps").get<int>();
    r.decision_agreement = fraction_from(j.at("decision_agreement"));
    r.rr = fraction_from(j.at("rr"));
    r.rr1 = fraction_from(j.at("rr1"));
    r.rr2 = fraction_from(j.at("rr2"));
    r.rr3 = fraction_from(j.at("rr3"));
    const auto& cats = j.at("sensitive").at("categories");
    for (auto c : kAllCategories) {
      r.sensitive.categories[static_cast<std::size_t>(c)] = row_from(cats.at(std::string(to_string(c))));
    }
    r.sensitive.total = row_from(j.at("sensitive").at("total"));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("report: ") + e.what());
  }
}

std::string render_report(const MetricsReport& r) {
  std::string out;
  out += fmt("%-10s %-28s %6s %9s %18s %7s\n", "Run", "Mode", "Tasks", "SR", "Uploaded/Total", "Steps");
  for (const auto* s : {&r.baseline, &r.ours}) {
    const std::string ratio = std::to_string(s->uploaded_elements) + "/" + std::to_string(s->total_elements);
    out += fmt("%-10s %-28s %6d %9s %18s %7d\n", s == &r.baseline ? "baseline" : "ours", s->mode.c_str(), s->tasks,
               pct(s->success_rate).c_str(), ratio.c_str(), s->steps);
  }
  out += "\n";
  out += fmt("%-24s %9s\n", "Reduction", "Value");
  out += fmt("%-24s %9s  (%d paired of %d decided steps)\n", "RR", pct(r.rr).c_str(), r.paired_steps,
             r.ours_decided_steps);
  out += fmt("%-24s %9s\n", "RR-1", pct(r.rr1).c_str());
  out += fmt("%-24s %9s\n", "RR-2", pct(r.rr2).c_str());
  out += fmt("%-24s %9s\n", "RR-3", pct(r.rr3).c_str());
  out += fmt("%-24s %9s\n", "Decision agreement", pct(r.decision_agreement).c_str());
  out += "\n";
  out += fmt("%-26s %9s %9s %10s\n", "Sensitive category", "Baseline", "Ours", "Reduction");
  for (auto c : kAllCategories) {
    const auto& row = r.sensitive.categories[static_cast<std::size_t>(c)];
    out += fmt("%-26s %9lld %9lld %10s\n", std::string(display_name(c)).c_str(), static_cast<long long>(row.baseline),
               static_cast<long long>(row.ours), row.reduction_text().c_str());
  }
  out += fmt("%-26s %9lld %9lld %10s\n", "Total", static_cast<long long>(r.sensitive.total.baseline),
             static_cast<long long>(r.sensitive.total.ours), r.sensitive.total.reduction_text().c_str());
  out += "\n";
  out += fmt("%-10s %-6s %14s %18s %12s\n", "Run", "Role", "Prompt tokens", "Completion tokens", "Seconds");
  for (const auto* s : {&r.baseline, &r.ours}) {
    const char* name = s == &r.baseline ? "baseline" : "ours";
    out += fmt("%-10s %-6s %14lld %18lld %12.3f\n", name, "local", static_cast<long long>(s->usage.local.prompt_tokens),
               static_cast<long long>(s->usage.local.completion_tokens), s->usage.local.wall_seconds);
    out += fmt("%-10s %-6s %14lld %18lld %12.3f\n", name, "cloud", static_cast<long long>(s->usage.cloud.prompt_tokens),
               static_cast<long long>(s->usage.cloud.completion_tokens), s->usage.cloud.wall_seconds);
  }
  return out;
}

}  // namespace coreagent::metrics
