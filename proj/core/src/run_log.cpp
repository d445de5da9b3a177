// SPDX-License-Identifier: Apache-2.0

#include "coreagent/run_log.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "coreagent/error.hpp"

namespace coreagent::runlog {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coreagent::runtime;

namespace {

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::SchemaMismatch, "cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
  out << text;
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, where + ": " + e.what());
  }
}

template <typename Fn>
auto guarded(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, where + ": " + e.what());
  }
}

json usage_to_json(const llm::TokenUsage& u) {
  return {{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens},
          {"wall_seconds", u.wall_seconds}};
}

llm::TokenUsage usage_from_json(const json& j) {
  llm::TokenUsage u;
  u.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
  u.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  u.wall_seconds = j.at("wall_seconds").get<double>();
  return u;
}

json subtask_to_json(const std::optional<planning::ConfirmedSubtask>& s) {
  if (!s) return nullptr;
  json j{{"kind", planning::to_string(s->kind)}, {"text", s->text}};
  j["source_block"] = s->source_block ? json(*s->source_block) : json(nullptr);
  return j;
}

std::optional<planning::ConfirmedSubtask> subtask_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  planning::ConfirmedSubtask s;
  s.kind = planning::confirm_kind_from_string(j.at("kind").get<std::string>());
  s.text = j.at("text").get<std::string>();
  if (!j.at("source_block").is_null()) s.source_block = j.at("source_block").get<int>();
  return s;
}

json identity_to_json(const ui::ElementIdentity& id) {
  return {{"text", id.text}, {"content_desc", id.content_desc}, {"resource_id", id.resource_id}};
}

ui::ElementIdentity identity_from_json(const json& j) {
  return ui::ElementIdentity{j.at("text").get<std::string>(), j.at("content_desc").get<std::string>(),
                             j.at("resource_id").get<std::string>()};
}

json pass_to_json(const PassRecord& p) {
  return {{"kind", to_string(p.kind)},
          {"screen_hash", p.screen_hash},
          {"total_elements", p.total_elements},
          {"uploaded_elements", p.uploaded_elements},
          {"blocks_total", p.blocks_total},
          {"blocks_consumed", p.blocks_consumed},
          {"uploaded_indices", p.uploaded_indices},
          {"ranking_order", p.ranking_order},
          {"subtask", subtask_to_json(p.subtask)}};
}

PassRecord pass_from_json(const json& j) {
  PassRecord p;
  p.kind = pass_kind_from_string(j.at("kind").get<std::string>());
  p.screen_hash = j.at("screen_hash").get<std::string>();
  p.total_elements = j.at("total_elements").get<int>();
  p.uploaded_elements = j.at("uploaded_elements").get<int>();
  p.blocks_total = j.at("blocks_total").get<int>();
  p.blocks_consumed = j.at("blocks_consumed").get<int>();
  p.uploaded_indices = j.at("uploaded_indices").get<std::vector<int>>();
  p.ranking_order = j.at("ranking_order").get<std::vector<int>>();
  p.subtask = subtask_from_json(j.at("subtask"));
  return p;
}

std::string screen_ref(const VisitedScreen& s) { return "screens/" + s.source_hash + ".xml"; }

}  // namespace

json config_to_json(const RunConfig& cfg) {
  return {{"mode", cfg.mode_string()},
          {"step_limit", cfg.step_limit},
          {"max_scrolls", cfg.max_scrolls},
          {"max_blocks", cfg.max_blocks},
          {"block_threshold", cfg.block_threshold},
          {"blind_scroll", cfg.blind_scroll},
          {"scroll_direction", cfg.scroll_direction},
          {"on_giveup", to_string(cfg.on_giveup)},
          {"seed", cfg.seed}};
}

RunConfig config_from_json(const json& j) {
  return guarded("run config", [&] {
    RunConfig cfg;
    cfg.apply_mode_string(j.at("mode").get<std::string>());
    cfg.step_limit = j.at("step_limit").get<int>();
    cfg.max_scrolls = j.at("max_scrolls").get<int>();
    cfg.max_blocks = j.at("max_blocks").get<int>();
    cfg.block_threshold = j.at("block_threshold").get<int>();
    cfg.blind_scroll = j.at("blind_scroll").get<bool>();
    cfg.scroll_direction = j.at("scroll_direction").get<std::string>();
    cfg.on_giveup = give_up_policy_from_string(j.at("on_giveup").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
  });
}

json step_to_json(const StepRecord& s) {
  json j{{"step", s.step},
         {"screen_hash", s.screen_hash},
         {"total_elements", s.total_elements},
         {"uploaded_elements", s.uploaded_elements},
         {"blocks_total", s.blocks_total},
         {"blocks_consumed", s.blocks_consumed},
         {"subtask", subtask_to_json(s.subtask)},
         {"scrolls_used", s.scrolls_used},
         {"local_usage", usage_to_json(s.local_usage)},
         {"cloud_usage", usage_to_json(s.cloud_usage)},
         {"notes", s.notes}};
  json passes = json::array();
  for (const auto& p : s.passes) passes.push_back(pass_to_json(p));
  j["passes"] = std::move(passes);
  if (s.decision) {
    const auto& d = s.decision->decision;
    j["decision"] = {{"element_index", d.element_index},
                     {"action", to_string(d.action)},
                     {"input_text", d.input_text},
                     {"blocks_consumed", d.blocks_consumed},
                     {"cloud_stated_subtask", d.cloud_stated_subtask},
                     {"target", identity_to_json(s.decision->target)},
                     {"target_rendering", s.decision->target_rendering}};
  } else {
    j["decision"] = nullptr;
  }
  return j;
}

StepRecord step_from_json(const json& j) {
  return guarded("step record", [&] {
    StepRecord s;
    s.step = j.at("step").get<int>();
    s.screen_hash = j.at("screen_hash").get<std::string>();
    s.total_elements = j.at("total_elements").get<int>();
    s.uploaded_elements = j.at("uploaded_elements").get<int>();
    s.blocks_total = j.at("blocks_total").get<int>();
    s.blocks_consumed = j.at("blocks_consumed").get<int>();
    s.subtask = subtask_from_json(j.at("subtask"));
    s.scrolls_used = j.at("scrolls_used").get<int>();
    s.local_usage = usage_from_json(j.at("local_usage"));
    s.cloud_usage = usage_from_json(j.at("cloud_usage"));
    s.notes = j.at("notes").get<std::vector<std::string>>();
    for (const auto& p : j.at("passes")) s.passes.push_back(pass_from_json(p));
    const auto& d = j.at("decision");
    if (!d.is_null()) {
      StepDecision sd;
      sd.decision.element_index = d.at("element_index").get<int>();
      sd.decision.action = action_kind_from_string(d.at("action").get<std::string>());
      sd.decision.input_text = d.at("input_text").get<std::string>();
      sd.decision.blocks_consumed = d.at("blocks_consumed").get<int>();
      sd.decision.cloud_stated_subtask = d.at("cloud_stated_subtask").get<std::string>();
      sd.target = identity_from_json(d.at("target"));
      sd.target_rendering = d.at("target_rendering").get<std::string>();
      s.decision = std::move(sd);
    }
    return s;
  });
}

json exchange_to_json(const TranscriptEntry& e) {
  const auto& x = e.exchange;
  return {{"step", e.step},
          {"pass", e.pass},
          {"role", llm::to_string(x.role)},
          {"template", llm::template_name(x.template_id)},
          {"digest", x.digest},
          {"prompt", x.prompt},
          {"response", x.response},
          {"usage", usage_to_json(x.usage)},
          {"error", x.error}};
}

TranscriptEntry exchange_from_json(const json& j) {
  return guarded("transcript entry", [&] {
    TranscriptEntry e;
    e.step = j.at("step").get<int>();
    e.pass = j.at("pass").get<int>();
    e.exchange.role = llm::role_from_string(j.at("role").get<std::string>());
    e.exchange.template_id = llm::template_from_name(j.at("template").get<std::string>());
    e.exchange.digest = j.at("digest").get<std::string>();
    e.exchange.prompt = j.at("prompt").get<std::string>();
    e.exchange.response = j.at("response").get<std::string>();
    e.exchange.usage = usage_from_json(j.at("usage"));
    e.exchange.error = j.at("error").get<std::string>();
    return e;
  });
}

void write_run_manifest(const fs::path& run_dir, const RunManifest& m) {
  fs::create_directories(run_dir);
  json j{{"schema_version", m.schema_version}, {"mode", m.mode}, {"config", m.config}, {"task_ids", m.task_ids}};
  write_text(run_dir / "run.json", j.dump(2) + "\n");
}

RunManifest read_run_manifest(const fs::path& run_dir) {
  const auto file = run_dir / "run.json";
  const json j = parse_json(read_text(file), file.string());
  return guarded(file.string(), [&] {
    RunManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kSchemaVersion) {
      throw Error(ErrorKind::SchemaMismatch,
                  file.string() + ": unsupported schema_version " + std::to_string(m.schema_version));
    }
    m.mode = j.at("mode").get<std::string>();
    m.config = j.at("config");
    m.task_ids = j.at("task_ids").get<std::vector<std::string>>();
    return m;
  });
}

void write_trace(const fs::path& run_dir, const Trace& trace) {
  const auto dir = run_dir / "tasks" / trace.task.task_id;
  fs::remove_all(dir);
  fs::create_directories(dir / "screens");

  json screens = json::array();
  std::set<std::string> written;
  for (const auto& s : trace.visited_screens) {
    screens.push_back({{"digest", s.digest}, {"source_hash", s.source_hash}, {"ref", screen_ref(s)}});
    if (written.insert(s.source_hash).second) write_text(dir / screen_ref(s), s.xml);
  }
  json history = json::array();
  for (const auto& h : trace.history) {
    history.push_back({{"step", h.step}, {"kind", to_string(h.kind)}, {"rendered", h.rendered}});
  }
  json error = nullptr;
  if (trace.outcome == Outcome::Error) error = {{"kind", trace.error_kind}, {"message", trace.error_message}};
  json j{{"schema_version", kSchemaVersion},
         {"task",
          {{"task_id", trace.task.task_id},
           {"app", trace.task.app},
           {"description", trace.task.description},
           {"launch", trace.task.launch},
           {"initial_screen", trace.task.initial_screen}}},
         {"outcome", to_string(trace.outcome)},
         {"error", error},
         {"steps", trace.steps.size()},
         {"history", history},
         {"visited_screens", screens}};
  write_text(dir / "trace.json", j.dump(2) + "\n");

  std::string steps;
  for (const auto& s : trace.steps) steps += step_to_json(s).dump() + "\n";
  write_text(dir / "steps.jsonl", steps);

  std::string transcript;
  for (const auto& e : trace.transcript) transcript += exchange_to_json(e).dump() + "\n";
  write_text(dir / "transcript.jsonl", transcript);
}

namespace {

template <typename T, typename Fn>
std::vector<T> read_jsonl(const fs::path& file, Fn&& parse) {
  std::vector<T> out;
  std::istringstream in(read_text(file));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    out.push_back(parse(parse_json(line, file.string() + ":" + std::to_string(lineno))));
  }
  return out;
}

}  // namespace

Trace read_trace(const fs::path& task_dir) {
  const auto file = task_dir / "trace.json";
  const json j = parse_json(read_text(file), file.string());
  Trace trace = guarded(file.string(), [&] {
    Trace t;
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorKind::SchemaMismatch, file.string() + ": unsupported schema_version");
    }
    const auto& task = j.at("task");
    t.task.task_id = task.at("task_id").get<std::string>();
    t.task.app = task.at("app").get<std::string>();
    t.task.description = task.at("description").get<std::string>();
    t.task.launch = task.at("launch").get<std::string>();
    t.task.initial_screen = task.at("initial_screen").get<std::string>();
    t.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    if (const auto& err = j.at("error"); !err.is_null()) {
      t.error_kind = err.at("kind").get<std::string>();
      t.error_message = err.at("message").get<std::string>();
    }
    for (const auto& h : j.at("history")) {
      t.history.push_back(HistoryEntry{h.at("step").get<int>(), history_kind_from_string(h.at("kind").get<std::string>()),
                                       h.at("rendered").get<std::string>()});
    }
    for (const auto& s : j.at("visited_screens")) {
      VisitedScreen v;
      v.digest = s.at("digest").get<std::string>();
      v.source_hash = s.at("source_hash").get<std::string>();
      v.xml = read_text(task_dir / s.at("ref").get<std::string>());
      t.visited_screens.push_back(std::move(v));
    }
    return t;
  });
  trace.steps = read_jsonl<StepRecord>(task_dir / "steps.jsonl", step_from_json);
  trace.transcript = read_jsonl<TranscriptEntry>(task_dir / "transcript.jsonl", exchange_from_json);
  return trace;
}

RunData read_run(const fs::path& run_dir) {
  RunData data;
  data.manifest = read_run_manifest(run_dir);
  for (const auto& id : data.manifest.task_ids) {
    data.traces.push_back(read_trace(run_dir / "tasks" / id));
    if (data.traces.back().task.task_id != id) {
      throw Error(ErrorKind::SchemaMismatch, "task directory '" + id + "' holds trace for '" +
                                                 data.traces.back().task.task_id + "'");
    }
  }
  return data;
}

}  // namespace coreagent::runlog
