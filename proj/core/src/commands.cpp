// SPDX-License-Identifier: Apache-2.0

#include "coreagent/commands.hpp"

#include <atomic>
#include <fstream>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <thread>

#include "coreagent/environment.hpp"
#include "coreagent/metrics.hpp"
#include "coreagent/partition.hpp"
#include "coreagent/run_log.hpp"
#include "coreagent/sensitive.hpp"
#include "coreagent/ui_model.hpp"

namespace coreagent::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ReplayDivergence:
    case ErrorKind::ScriptMiss:
      return exit_code::kDivergence;
    case ErrorKind::Transport:
    case ErrorKind::Timeout:
    case ErrorKind::AuthFailure:
    case ErrorKind::BackendFailure:
    case ErrorKind::BridgeTimeout:
    case ErrorKind::EnvironmentFailure:
      return exit_code::kBackend;
    case ErrorKind::SchemaMismatch:
    case ErrorKind::MalformedXml:
    case ErrorKind::EmptyHierarchy:
      return exit_code::kSchema;
    default:
      return exit_code::kUsage;
  }
}

int exit_code_for_label(const std::string& label) {
  if (label.empty()) return exit_code::kOk;
  for (int k = 0; k <= static_cast<int>(ErrorKind::InvalidArgument); ++k) {
    const auto kind = static_cast<ErrorKind>(k);
    if (to_string(kind) == label) return exit_code_for(kind);
  }
  return exit_code::kUsage;
}

EnvFactory make_env_factory(const EnvOptions& options) {
  return [options](const fs::path& task_dir, const TaskSpec& spec) -> std::unique_ptr<runtime::Environment> {
    const std::chrono::milliseconds timeout(options.timeout_ms);
    switch (options.kind) {
      case EnvKind::Replay:
        return std::make_unique<runtime::TraceReplayEnv>(task_dir, spec.initial_screen, options.strict);
      case EnvKind::BridgeProcess:
        return std::make_unique<runtime::CommandBridgeEnv>(runtime::spawn_bridge_process(options.bridge_command),
                                                           timeout);
      case EnvKind::BridgeTcp:
        return std::make_unique<runtime::CommandBridgeEnv>(runtime::connect_bridge_tcp(options.host, options.port),
                                                           timeout);
    }
    throw Error(ErrorKind::InvalidArgument, "unknown environment kind");
  };
}

HarnessResult run_harness(const fs::path& tasks_dir, const fs::path& out_dir, const llm::Gateway& gateway,
                          const runtime::RunConfig& cfg, const EnvFactory& env_factory, int jobs) {
  const auto dirs = list_task_dirs(tasks_dir);
  std::vector<TaskSpec> specs;
  specs.reserve(dirs.size());
  for (const auto& d : dirs) specs.push_back(load_task(d));

  HarnessResult result;
  result.traces.resize(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      runtime::Trace& trace = result.traces[i];
      try {
        auto env = env_factory(dirs[i], specs[i]);
        trace = runtime::run_task(specs[i], *env, gateway, cfg);
      } catch (const Error& e) {
        trace = runtime::Trace{};
        trace.task = specs[i];
        trace.error_kind = std::string(to_string(e.kind()));
        trace.error_message = e.what();
      } catch (const std::exception& e) {
        trace = runtime::Trace{};
        trace.task = specs[i];
        trace.error_kind = "Internal";
        trace.error_message = e.what();
      }
      spdlog::info("{}: {} ({} steps)", specs[i].task_id, runtime::to_string(trace.outcome), trace.steps.size());
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(specs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // Only the pieces this tool owns are replaced.
  fs::remove_all(out_dir / "tasks");
  runlog::RunManifest manifest;
  manifest.mode = cfg.mode_string();
  manifest.config = runlog::config_to_json(cfg);
  for (const auto& s : specs) manifest.task_ids.push_back(s.task_id);
  runlog::write_run_manifest(out_dir, manifest);
  for (const auto& t : result.traces) {
    runlog::write_trace(out_dir, t);
    result.exit_code = std::max(result.exit_code, exit_code_for_label(t.error_kind));
  }
  return result;
}

// ---------------------------------------------------------------------------

int cmd_partition(const PartitionArgs& args, std::ostream& out) {
  std::ifstream in(args.dump, std::ios::binary);
  if (!in) throw Error(ErrorKind::SchemaMismatch, "cannot read " + args.dump.string());
  const std::string xml((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto tree = ui::parse_hierarchy(xml);
  const auto p = blocks::partition(tree, blocks::PartitionOptions{args.threshold, args.max_blocks});
  if (args.json) {
    json blocks_json = json::array();
    for (const auto& b : p.blocks) {
      blocks_json.push_back({{"block_id", b.block_id},
                             {"anchor_node", b.anchor_node},
                             {"bounds", {b.bounds.left, b.bounds.top, b.bounds.right, b.bounds.bottom}},
                             {"element_indices", b.element_indices},
                             {"renderings", b.renderings}});
    }
    json doc{{"elements", p.element_count()},
             {"chosen_level", p.chosen_level},
             {"reached_threshold", p.reached_threshold},
             {"degenerate", p.degenerate},
             {"screen_digest", tree.screen_digest()},
             {"blocks", blocks_json}};
    out << doc.dump(2) << "\n";
    return exit_code::kOk;
  }
  out << "elements: " << p.element_count() << "  blocks: " << p.blocks.size() << "  level: " << p.chosen_level
      << "  threshold reached: " << (p.reached_threshold ? "yes" : "no") << "\n";
  for (const auto& b : p.blocks) {
    out << "block " << b.block_id << "  [" << b.bounds.left << "," << b.bounds.top << "][" << b.bounds.right << ","
        << b.bounds.bottom << "]  " << b.size() << " element" << (b.size() == 1 ? "" : "s") << "\n";
    for (const auto& r : b.renderings) out << "  " << r << "\n";
  }
  return exit_code::kOk;
}

namespace {

json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::SchemaMismatch, "cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, file.string() + ": " + e.what());
  }
}

void print_summary(const HarnessResult& r, const fs::path& out_dir, std::ostream& out) {
  for (const auto& t : r.traces) {
    out << t.task.task_id << "  " << runtime::to_string(t.outcome) << "  steps=" << t.steps.size();
    if (!t.error_kind.empty()) out << "  error=" << t.error_message;
    out << "\n";
  }
  out << "run directory: " << out_dir.string() << "\n";
}

}  // namespace

runtime::RunConfig resolve_run_config(const CommonRunArgs& args) {
  runtime::RunConfig cfg;
  std::string mode = "core";
  if (!args.config.empty()) {
    const json doc = read_json_file(args.config);
    if (doc.contains("run")) {
      const auto& r = doc.at("run");
      try {
        mode = r.value("mode", mode);
        cfg.step_limit = r.value("step_limit", cfg.step_limit);
        cfg.max_scrolls = r.value("max_scrolls", cfg.max_scrolls);
        cfg.max_blocks = r.value("max_blocks", cfg.max_blocks);
        cfg.block_threshold = r.value("block_threshold", cfg.block_threshold);
        cfg.blind_scroll = r.value("blind_scroll", cfg.blind_scroll);
        cfg.scroll_direction = r.value("scroll_direction", cfg.scroll_direction);
        cfg.seed = r.value("seed", cfg.seed);
        if (r.contains("on_giveup")) {
          cfg.on_giveup = runtime::give_up_policy_from_string(r.at("on_giveup").get<std::string>());
        }
      } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch, args.config.string() + ": run: " + e.what());
      }
    }
  }
  if (!args.mode.empty()) mode = args.mode;
  cfg.apply_mode_string(mode);
  if (args.step_limit) cfg.step_limit = *args.step_limit;
  if (args.max_scrolls) cfg.max_scrolls = *args.max_scrolls;
  if (args.max_blocks) cfg.max_blocks = *args.max_blocks;
  if (args.seed) cfg.seed = *args.seed;
  if (args.on_giveup) cfg.on_giveup = runtime::give_up_policy_from_string(*args.on_giveup);
  if (cfg.step_limit < 1) throw Error(ErrorKind::InvalidArgument, "--step-limit must be >= 1");
  if (cfg.max_scrolls < 0) throw Error(ErrorKind::InvalidArgument, "--max-scrolls must be >= 0");
  if (cfg.max_blocks < 0) throw Error(ErrorKind::InvalidArgument, "--max-blocks must be >= 0");
  return cfg;
}

int cmd_run(const RunArgs& args, std::ostream& out) {
  const auto cfg = resolve_run_config(args.common);
  auto gw_cfg = llm::load_gateway_config(args.common.config);
  gw_cfg.lenient = gw_cfg.lenient || args.common.lenient;

  std::shared_ptr<llm::RecordingBackend> local_rec;
  std::shared_ptr<llm::RecordingBackend> cloud_rec;
  llm::Gateway gateway(gw_cfg.max_concurrency);
  if (gw_cfg.local.configured()) {
    auto b = llm::make_backend(gw_cfg.local, gw_cfg.lenient);
    if (!args.record_scripts.empty()) b = local_rec = std::make_shared<llm::RecordingBackend>(b);
    gateway.set_backend(llm::Role::Local, b);
  }
  if (gw_cfg.cloud.configured()) {
    auto b = llm::make_backend(gw_cfg.cloud, gw_cfg.lenient);
    if (!args.record_scripts.empty()) b = cloud_rec = std::make_shared<llm::RecordingBackend>(b);
    gateway.set_backend(llm::Role::Cloud, b);
  }

  const auto result =
      run_harness(args.common.tasks_dir, args.common.out_dir, gateway, cfg, make_env_factory(args.env), args.common.jobs);

  if (!args.record_scripts.empty()) {
    std::vector<llm::ScriptRecord> records;
    for (const auto& rec : {local_rec, cloud_rec}) {
      if (!rec) continue;
      auto r = rec->records();
      records.insert(records.end(), r.begin(), r.end());
    }
    fs::create_directories(args.record_scripts);
    llm::write_manifest(args.record_scripts / "manifest.json", std::move(records));
  }
  print_summary(result, args.common.out_dir, out);
  return result.exit_code;
}

int cmd_replay(const ReplayArgs& args, std::ostream& out) {
  const auto cfg = resolve_run_config(args.common);
  int max_concurrency = 4;
  if (!args.common.config.empty()) max_concurrency = llm::load_gateway_config(args.common.config).max_concurrency;
  auto scripted = llm::ScriptedBackend::load(args.scripts, args.common.lenient);
  llm::Gateway gateway(scripted, scripted, max_concurrency);
  EnvOptions env;
  env.strict = !args.common.lenient;
  const auto result = run_harness(args.common.tasks_dir, args.common.out_dir, gateway, cfg, make_env_factory(env),
                                  args.common.jobs);
  const auto misses = scripted->misses();
  if (!args.record_misses.empty() && !misses.empty()) {
    llm::write_manifest(args.record_misses, misses);
    out << misses.size() << " unscripted request(s) written to " << args.record_misses.string() << "\n";
  }
  print_summary(result, args.common.out_dir, out);
  if (!misses.empty()) return std::max(result.exit_code, exit_code::kDivergence);
  return result.exit_code;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const auto baseline = runlog::read_run(args.baseline);
  const auto ours = runlog::read_run(args.ours);

  std::unique_ptr<metrics::SensitiveClassifier> classifier;
  std::optional<llm::Gateway> gateway;
  if (args.classifier == "rules") {
    classifier = std::make_unique<metrics::RuleClassifier>(
        args.rules.empty() ? metrics::RuleClassifier::builtin() : metrics::RuleClassifier::from_file(args.rules));
  } else if (args.classifier == "llm") {
    gateway.emplace(llm::Gateway::from_config(llm::load_gateway_config(args.config)));
    classifier = std::make_unique<metrics::LlmClassifier>(*gateway, llm::Role::Cloud);
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown classifier '" + args.classifier + "'");
  }

  const auto report = metrics::evaluate(baseline, ours, args.oracle_dir, *classifier);
  if (!args.json_out.empty()) {
    if (args.json_out.has_parent_path()) fs::create_directories(args.json_out.parent_path());
    std::ofstream f(args.json_out, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + args.json_out.string());
    f << metrics::report_to_json(report).dump(2) << "\n";
  }
  out << metrics::render_report(report);
  return exit_code::kOk;
}

int cmd_report(const fs::path& report_json, std::ostream& out) {
  out << metrics::render_report(metrics::report_from_json(read_json_file(report_json)));
  return exit_code::kOk;
}

int guarded(const std::function<int()>& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  }
}

}  // namespace coreagent::cli
