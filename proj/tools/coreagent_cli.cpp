// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <iostream>
#include <spdlog/spdlog.h>

#include "coreagent/commands.hpp"

namespace {

using namespace coreagent::cli;

void add_common(CLI::App* cmd, CommonRunArgs& a) {
  cmd->add_option("tasks", a.tasks_dir, "Directory of task folders (each with task.yaml)")->required();
  cmd->add_option("--out", a.out_dir, "Run directory to write")->required();
  cmd->add_option("--mode", a.mode,
                  "core | cloud_baseline | local_baseline, optionally with ablations, e.g. core,no_accumulation,ranking=random");
  cmd->add_option("--step-limit", a.step_limit, "Maximum steps per task");
  cmd->add_option("--max-scrolls", a.max_scrolls, "Scroll attempts per step");
  cmd->add_option("--max-blocks", a.max_blocks, "Merge layout blocks down to this many (0 = no limit)");
  cmd->add_option("--seed", a.seed, "Seed for random ranking");
  cmd->add_option("--on-giveup", a.on_giveup, "finish_check | skip_step | abort");
  cmd->add_option("--jobs", a.jobs, "Tasks to run in parallel")->check(CLI::PositiveNumber);
  cmd->add_option("--config", a.config, "Gateway/run configuration JSON");
  cmd->add_flag("--lenient", a.lenient, "Tolerate script misses and replay divergences");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coreagent: layout-aware cloud/local mobile agent"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  PartitionArgs part;
  auto* c_part = app.add_subcommand("partition", "Show the block partition of a UI dump");
  c_part->add_option("dump", part.dump, "UI hierarchy XML")->required()->check(CLI::ExistingFile);
  c_part->add_option("--max-blocks", part.max_blocks, "Merge blocks down to this many");
  c_part->add_option("--threshold", part.threshold, "Minimum block count when choosing a level");
  c_part->add_flag("--json", part.json, "Emit JSON");

  RunArgs run;
  std::string env_kind = "replay";
  auto* c_run = app.add_subcommand("run", "Run tasks against configured model backends");
  add_common(c_run, run.common);
  c_run->add_option("--env", env_kind, "replay | bridge | tcp")
      ->check(CLI::IsMember({"replay", "bridge", "tcp"}));
  c_run->add_option("--bridge-cmd", run.env.bridge_command, "Controller command for --env bridge");
  c_run->add_option("--bridge-host", run.env.host, "Controller host for --env tcp");
  c_run->add_option("--bridge-port", run.env.port, "Controller port for --env tcp");
  c_run->add_option("--bridge-timeout-ms", run.env.timeout_ms, "Reply timeout for bridge commands");
  c_run->add_option("--record-scripts", run.record_scripts, "Save every exchange as a replay script here");

  ReplayArgs replay;
  auto* c_replay = app.add_subcommand("replay", "Replay tasks with scripted model responses");
  add_common(c_replay, replay.common);
  c_replay->add_option("--scripts", replay.scripts, "Script manifest file or directory")->required();
  c_replay->add_option("--record-misses", replay.record_misses, "Write unscripted requests here (with --lenient)");

  EvalArgs eval;
  std::string oracle;
  auto* c_eval = app.add_subcommand("eval", "Compare a baseline run with our run");
  c_eval->add_option("baseline", eval.baseline, "Baseline run directory")->required();
  c_eval->add_option("ours", eval.ours, "Our run directory")->required();
  c_eval->add_option("--oracle", oracle, "Oracle directory (<dir>/<task_id>/oracle/)");
  c_eval->add_option("--json", eval.json_out, "Write the report as JSON");
  c_eval->add_option("--rules", eval.rules, "Sensitive-category rule file");
  c_eval->add_option("--classifier", eval.classifier, "rules | llm")->check(CLI::IsMember({"rules", "llm"}));
  c_eval->add_option("--config", eval.config, "Gateway configuration for --classifier llm");

  std::filesystem::path report_file;
  auto* c_report = app.add_subcommand("report", "Render a saved evaluation report");
  c_report->add_option("report", report_file, "Report JSON from eval --json")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  return guarded(
      [&]() -> int {
        if (*c_part) return cmd_partition(part, std::cout);
        if (*c_run) {
          if (env_kind == "bridge") run.env.kind = EnvKind::BridgeProcess;
          if (env_kind == "tcp") run.env.kind = EnvKind::BridgeTcp;
          run.env.strict = !run.common.lenient;
          return cmd_run(run, std::cout);
        }
        if (*c_replay) return cmd_replay(replay, std::cout);
        if (*c_eval) {
          if (!oracle.empty()) eval.oracle_dir = oracle;
          return cmd_eval(eval, std::cout);
        }
        return cmd_report(report_file, std::cout);
      },
      std::cerr);
}
