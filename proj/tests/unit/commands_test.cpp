// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "coreagent/commands.hpp"
#include "coreagent/metrics.hpp"
#include "coreagent/run_log.hpp"
#include "plan_responder.hpp"
#include "test_util.hpp"

namespace {

using namespace coreagent;
using namespace coreagent::cli;
using testkit::TempDir;
namespace fs = std::filesystem;

std::map<std::string, std::string> dir_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = testkit::read_file(e.path());
  }
  return out;
}

ReplayArgs replay_args(const std::string& mode, const fs::path& out) {
  ReplayArgs a;
  a.common.tasks_dir = testkit::fixture_tasks_dir();
  a.common.out_dir = out;
  a.common.mode = mode;
  a.scripts = testkit::fixture_scripts_dir() / mode;
  return a;
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorKind::ScriptMiss), exit_code::kDivergence);
  EXPECT_EQ(exit_code_for(ErrorKind::ReplayDivergence), exit_code::kDivergence);
  EXPECT_EQ(exit_code_for(ErrorKind::Timeout), exit_code::kBackend);
  EXPECT_EQ(exit_code_for(ErrorKind::EnvironmentFailure), exit_code::kBackend);
  EXPECT_EQ(exit_code_for(ErrorKind::SchemaMismatch), exit_code::kSchema);
  EXPECT_EQ(exit_code_for(ErrorKind::MalformedXml), exit_code::kSchema);
  EXPECT_EQ(exit_code_for(ErrorKind::InvalidArgument), exit_code::kUsage);
  EXPECT_EQ(exit_code_for_label(""), exit_code::kOk);
  EXPECT_EQ(exit_code_for_label("ScriptMiss"), exit_code::kDivergence);
  EXPECT_EQ(exit_code_for_label("Internal"), exit_code::kUsage);
}

TEST(Guarded, ErrorsBecomeExitCodes) {
  std::ostringstream err;
  EXPECT_EQ(guarded([] { return 0; }, err), 0);
  EXPECT_EQ(guarded([]() -> int { throw Error(ErrorKind::AuthFailure, "no key"); }, err), exit_code::kBackend);
  EXPECT_NE(err.str().find("no key"), std::string::npos);
}

TEST(PartitionCommand, TextAndJson) {
  PartitionArgs a;
  a.dump = testkit::fixture_tasks_dir() / "clock_set_alarm/screens/000.xml";
  std::ostringstream text;
  EXPECT_EQ(cmd_partition(a, text), 0);
  EXPECT_NE(text.str().find("elements: 10  blocks: 3  level: 2  threshold reached: yes"), std::string::npos);
  EXPECT_NE(text.str().find("block 1  [40,260][1040,610]  4 elements"), std::string::npos);
  a.json = true;
  std::ostringstream js;
  cmd_partition(a, js);
  const auto doc = nlohmann::json::parse(js.str());
  EXPECT_EQ(doc["chosen_level"], 2);
  EXPECT_EQ(doc["blocks"][2]["element_indices"], nlohmann::json({8, 9}));
  a.dump = "/nonexistent.xml";
  EXPECT_THROW(cmd_partition(a, js), Error);
}

TEST(RunConfigResolution, DefaultsThenFileThenFlags) {
  TempDir dir("cfg");
  CommonRunArgs a;
  EXPECT_EQ(resolve_run_config(a).mode_string(), "core");
  testkit::write_file(dir / "c.json", R"({"run":{"mode":"cloud_baseline","step_limit":9,"seed":5,"on_giveup":"abort"}})");
  a.config = dir / "c.json";
  auto cfg = resolve_run_config(a);
  EXPECT_EQ(cfg.mode, runtime::Mode::CloudBaseline);
  EXPECT_EQ(cfg.step_limit, 9);
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_EQ(cfg.on_giveup, runtime::GiveUpPolicy::Abort);
  a.mode = "core,single_block";
  a.step_limit = 3;
  a.on_giveup = "skip_step";
  cfg = resolve_run_config(a);
  EXPECT_EQ(cfg.mode_string(), "core,single_block");
  EXPECT_EQ(cfg.step_limit, 3);
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_EQ(cfg.on_giveup, runtime::GiveUpPolicy::SkipStep);
  a.step_limit = 0;
  EXPECT_THROW(resolve_run_config(a), Error);
  testkit::write_file(dir / "c.json", R"({"run":{"step_limit":"many"}})");
  a.step_limit.reset();
  EXPECT_THROW(resolve_run_config(a), Error);
}

TEST(ReplayCommand, CommittedScriptsReplayCleanly) {
  TempDir dir("replay");
  for (const std::string mode : {"core", "cloud_baseline"}) {
    std::ostringstream out;
    EXPECT_EQ(cmd_replay(replay_args(mode, dir / mode), out), 0) << out.str();
    const auto run = runlog::read_run(dir / mode);
    ASSERT_EQ(run.traces.size(), 3u);
    for (const auto& t : run.traces) EXPECT_EQ(t.outcome, runtime::Outcome::Finished) << t.task.task_id;
  }
  EvalArgs e;
  e.baseline = dir / "cloud_baseline";
  e.ours = dir / "core";
  e.oracle_dir = testkit::fixture_tasks_dir();
  e.json_out = dir / "report/report.json";
  std::ostringstream text;
  EXPECT_EQ(cmd_eval(e, text), 0);
  const auto report = metrics::report_from_json(nlohmann::json::parse(testkit::read_file(e.json_out)));
  ASSERT_TRUE(report.rr);
  EXPECT_GT(report.rr->value(), 0.0);
  EXPECT_EQ(report.ours.success_rate, metrics::Fraction(1, 1));
  std::ostringstream again;
  EXPECT_EQ(cmd_report(e.json_out, again), 0);
  EXPECT_EQ(again.str(), text.str());
  e.classifier = "magic";
  EXPECT_THROW(cmd_eval(e, text), Error);
}

TEST(ReplayCommand, MissingScriptsFailWithDivergenceCode) {
  TempDir dir("replay");
  auto a = replay_args("core", dir / "out");
  a.scripts = testkit::fixture_scripts_dir() / "cloud_baseline";  // wrong mode's scripts
  std::ostringstream out;
  EXPECT_EQ(cmd_replay(a, out), exit_code::kDivergence);
  a.common.lenient = true;
  a.record_misses = dir / "misses.json";
  // Misses answer "", which the planner then rejects as a backend failure.
  EXPECT_EQ(cmd_replay(a, out), exit_code::kBackend);
  EXPECT_TRUE(fs::exists(a.record_misses));
}

TEST(Harness, OutputIndependentOfJobs) {
  TempDir dir("jobs");
  for (int jobs : {1, 3}) {
    auto a = replay_args("core", dir / ("j" + std::to_string(jobs)));
    a.common.jobs = jobs;
    std::ostringstream out;
    ASSERT_EQ(cmd_replay(a, out), 0);
  }
  EXPECT_EQ(dir_contents(dir / "j1"), dir_contents(dir / "j3"));
}

TEST(Harness, EnvironmentFailureRecordedPerTask) {
  TempDir dir("envfail");
  auto plan = testkit::make_plan_backend();
  llm::Gateway gw(plan, plan);
  EnvOptions env;
  env.kind = EnvKind::BridgeTcp;
  env.port = 1;
  const auto r = run_harness(testkit::fixture_tasks_dir(), dir.path(), gw, runtime::RunConfig{}, make_env_factory(env), 2);
  EXPECT_EQ(r.exit_code, exit_code::kBackend);
  ASSERT_EQ(r.traces.size(), 3u);
  for (const auto& t : r.traces) EXPECT_EQ(t.error_kind, "EnvironmentFailure");
  EXPECT_EQ(runlog::read_run(dir.path()).traces.size(), 3u);
}

TEST(FixtureScripts, CommittedManifestsAreCurrent) {
  TempDir dir("scripts");
  for (const std::string mode : {"core", "cloud_baseline"}) {
    auto recorder = std::make_shared<llm::RecordingBackend>(testkit::make_plan_backend());
    llm::Gateway gateway(recorder, recorder, 4);
    runtime::RunConfig cfg;
    cfg.apply_mode_string(mode);
    const auto r = run_harness(testkit::fixture_tasks_dir(), dir / ("run_" + mode), gateway, cfg, make_env_factory({}), 1);
    ASSERT_EQ(r.exit_code, 0);
    llm::write_manifest(dir / mode / "manifest.json", recorder->records());
    EXPECT_EQ(testkit::read_file(dir / mode / "manifest.json"),
              testkit::read_file(testkit::fixture_scripts_dir() / mode / "manifest.json"))
        << "regenerate with make_fixture_scripts";
  }
}

}  // namespace
