// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "coreagent/error.hpp"
#include "coreagent/runtime.hpp"
#include "plan_responder.hpp"
#include "test_util.hpp"

namespace {

using namespace coreagent;
using namespace coreagent::runtime;
using llm::TemplateId;

TaskSpec fixture(const std::string& id) { return load_task(testkit::fixture_tasks_dir() / id); }

Trace run_fixture(const std::string& id, const llm::Gateway& gw, const RunConfig& cfg, bool strict = true) {
  const auto spec = fixture(id);
  TraceReplayEnv env(testkit::fixture_tasks_dir() / id, spec.initial_screen, strict);
  return run_task(spec, env, gw, cfg);
}

std::vector<std::string> rendered_history(const Trace& t) {
  std::vector<std::string> out;
  for (const auto& h : t.history) out.push_back(h.rendered);
  return out;
}

TEST(RunConfig, ModeStrings) {
  RunConfig c;
  c.apply_mode_string("core,no_accumulation,ranking=random");
  EXPECT_EQ(c.mode, Mode::Core);
  EXPECT_TRUE(c.ablations.no_accumulation);
  EXPECT_EQ(c.ablations.ranking, decision::RankingStrategy::Random);
  EXPECT_EQ(c.mode_string(), "core,no_accumulation,ranking=random");
  c.apply_mode_string("no_partition, no_coplanning, no_multi_round, basic_order");
  EXPECT_EQ(c.mode_string(), "core,no_partition,no_coplanning,single_block,ranking=basic");
  RunConfig round;
  round.apply_mode_string(c.mode_string());
  EXPECT_EQ(round.ablations, c.ablations);
  c.apply_mode_string("cloud_baseline");
  EXPECT_EQ(c.mode, Mode::CloudBaseline);
  EXPECT_EQ(c.ablations, Ablations{});
  c.apply_mode_string("local_baseline");
  EXPECT_EQ(c.mode_string(), "local_baseline");
  EXPECT_THROW(c.apply_mode_string("cloud_baseline,no_partition"), Error);
  EXPECT_THROW(c.apply_mode_string("turbo"), Error);
  EXPECT_THROW(c.apply_mode_string("ranking=psychic"), Error);
}

TEST(RunConfig, EnumStrings) {
  for (auto p : {GiveUpPolicy::FinishCheck, GiveUpPolicy::SkipStep, GiveUpPolicy::Abort}) {
    EXPECT_EQ(give_up_policy_from_string(to_string(p)), p);
  }
  for (auto o : {Outcome::Finished, Outcome::StepLimit, Outcome::Exhausted, Outcome::Error}) {
    EXPECT_EQ(outcome_from_string(to_string(o)), o);
  }
  for (auto k : {PassRecord::Kind::Decision, PassRecord::Kind::Exhausted, PassRecord::Kind::Finished,
                 PassRecord::Kind::FinishCheck}) {
    EXPECT_EQ(pass_kind_from_string(to_string(k)), k);
  }
  for (auto k : {HistoryKind::Launch, HistoryKind::Tap, HistoryKind::LongTap, HistoryKind::Input, HistoryKind::Scroll,
                 HistoryKind::Finish}) {
    EXPECT_EQ(history_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(give_up_policy_from_string("shrug"), Error);
  EXPECT_THROW(outcome_from_string("meh"), Error);
}

TEST(History, EntriesRenderAndParse) {
  const std::string el = "<button description=\"Add alarm\" id=\"fab\" index=8></button>";
  const auto tap = make_history_entry(3, Action::tap(8), el);
  EXPECT_EQ(tap.rendered, "Click " + el);
  EXPECT_EQ(tap.kind, HistoryKind::Tap);
  EXPECT_EQ(make_history_entry(1, Action::long_tap(8), el).rendered, "LongClick " + el);
  const auto input = make_history_entry(2, Action::input(0, "08:00"), "<input index=0></input>");
  EXPECT_EQ(input.rendered, "InputText \"08:00\" <input index=0></input>");
  EXPECT_EQ(make_history_entry(2, Action::scroll(), "").rendered, "Scroll down");
  EXPECT_EQ(make_history_entry(0, Action::launch("Clock"), "").rendered, "LaunchApp Clock");
  EXPECT_EQ(finish_entry(4).rendered, "Finish");

  const auto p = parse_history_entry(tap.rendered);
  EXPECT_EQ(p.kind, HistoryKind::Tap);
  EXPECT_EQ(p.element_index, 8);
  EXPECT_EQ(parse_history_entry(input.rendered).element_index, 0);
  EXPECT_EQ(parse_history_entry("Scroll down").kind, HistoryKind::Scroll);
  EXPECT_FALSE(parse_history_entry("LaunchApp Clock").element_index);
  EXPECT_THROW(parse_history_entry("Swipe left"), Error);
}

TEST(StepSeed, DependsOnEveryComponent) {
  const auto s = step_seed(1, "task", 2, 0);
  EXPECT_EQ(s, step_seed(1, "task", 2, 0));
  EXPECT_NE(s, step_seed(2, "task", 2, 0));
  EXPECT_NE(s, step_seed(1, "other", 2, 0));
  EXPECT_NE(s, step_seed(1, "task", 3, 0));
  EXPECT_NE(s, step_seed(1, "task", 2, 1));
}

TEST(RunTask, CoreModeCompletesSetAlarm) {
  llm::Gateway gw(testkit::make_plan_backend(), testkit::make_plan_backend());
  RunConfig cfg;
  const auto t = run_fixture("clock_set_alarm", gw, cfg);
  ASSERT_EQ(t.outcome, Outcome::Finished) << t.error_message;
  ASSERT_EQ(t.steps.size(), 3u);
  const auto h = rendered_history(t);
  ASSERT_EQ(h.size(), 4u);
  EXPECT_EQ(h[0], "LaunchApp Clock");
  EXPECT_EQ(h[1], "Click <button description=\"Add alarm\" id=\"fab\" index=8></button>");
  EXPECT_EQ(h[2].rfind("InputText \"08:00\" <input", 0), 0u);
  EXPECT_EQ(h[3], "Finish");
  // Exactly one history entry per step.
  for (std::size_t i = 1; i < t.history.size(); ++i) EXPECT_EQ(t.history[i].step, static_cast<int>(i));

  const auto& s1 = t.steps[0];
  EXPECT_EQ(s1.total_elements, 10);
  EXPECT_EQ(s1.uploaded_elements, 2);
  EXPECT_EQ(s1.blocks_total, 3);
  EXPECT_EQ(s1.blocks_consumed, 1);
  ASSERT_TRUE(s1.decision);
  EXPECT_EQ(s1.decision->decision.element_index, 8);
  EXPECT_EQ(s1.decision->target.content_desc, "Add alarm");
  ASSERT_TRUE(s1.subtask);
  EXPECT_EQ(s1.subtask->kind, planning::ConfirmKind::Chosen);
  EXPECT_GT(s1.local_usage.prompt_tokens, 0);
  EXPECT_GT(s1.cloud_usage.prompt_tokens, 0);
  ASSERT_EQ(s1.passes.size(), 1u);
  EXPECT_EQ(s1.passes[0].uploaded_indices, (std::vector<int>{8, 9}));
  EXPECT_EQ(s1.passes[0].ranking_order.front(), 2);

  EXPECT_FALSE(t.steps[2].decision);
  EXPECT_EQ(t.steps[2].subtask->kind, planning::ConfirmKind::Finished);
  EXPECT_EQ(t.steps[2].uploaded_elements, 0);
  EXPECT_EQ(t.visited_screens.size(), 3u);
  EXPECT_FALSE(t.transcript.empty());
}

TEST(RunTask, FinishedAtFirstStep) {
  auto backend = std::make_shared<testkit::QueueBackend>();
  backend->fallback(TemplateId::LocalSubtask, "Nothing to do");
  backend->push(TemplateId::CloudConfirm, "FINISHED");
  llm::Gateway gw(backend, backend);
  const auto t = run_fixture("clock_set_alarm", gw, RunConfig{});
  EXPECT_EQ(t.outcome, Outcome::Finished);
  ASSERT_EQ(t.steps.size(), 1u);
  EXPECT_EQ(rendered_history(t), (std::vector<std::string>{"LaunchApp Clock", "Finish"}));
  EXPECT_TRUE(backend->requests(TemplateId::CloudDecide).empty());
  EXPECT_TRUE(backend->requests(TemplateId::LocalRank).empty());
}

TEST(RunTask, StepLimit) {
  llm::Gateway gw(testkit::make_plan_backend(), testkit::make_plan_backend());
  RunConfig cfg;
  cfg.step_limit = 1;
  const auto t = run_fixture("clock_set_alarm", gw, cfg);
  EXPECT_EQ(t.outcome, Outcome::StepLimit);
  EXPECT_EQ(t.steps.size(), 1u);
  cfg.step_limit = 0;
  TraceReplayEnv env(testkit::fixture_tasks_dir() / "clock_set_alarm", "000");
  EXPECT_THROW(run_task(fixture("clock_set_alarm"), env, gw, cfg), Error);
}

TEST(RunTask, ScrollsUntilTargetAppears) {
  llm::Gateway gw(testkit::make_plan_backend(), testkit::make_plan_backend());
  const auto t = run_fixture("clock_enable_alarm", gw, RunConfig{});
  ASSERT_EQ(t.outcome, Outcome::Finished) << t.error_message;
  const auto& s1 = t.steps[0];
  EXPECT_EQ(s1.scrolls_used, 2);
  EXPECT_EQ(s1.passes.size(), 3u);
  EXPECT_EQ(s1.passes[0].kind, PassRecord::Kind::Exhausted);
  EXPECT_EQ(s1.passes[2].kind, PassRecord::Kind::Decision);
  // Step totals sum over every pass of the step.
  int total = 0;
  for (const auto& p : s1.passes) total += p.total_elements;
  EXPECT_EQ(s1.total_elements, total);
  ASSERT_TRUE(s1.decision);
  EXPECT_EQ(s1.decision->target.content_desc, "10:45 PM alarm, off");
  EXPECT_EQ(s1.screen_hash, s1.passes[2].screen_hash);
}

TEST(RunTask, ScrollBudgetRespected) {
  llm::Gateway gw(testkit::make_plan_backend(), testkit::make_plan_backend());
  RunConfig cfg;
  cfg.max_scrolls = 1;
  cfg.on_giveup = GiveUpPolicy::Abort;
  const auto t = run_fixture("clock_enable_alarm", gw, cfg);
  EXPECT_EQ(t.outcome, Outcome::Exhausted);
  ASSERT_EQ(t.steps.size(), 1u);
  EXPECT_EQ(t.steps[0].scrolls_used, 1);
  EXPECT_EQ(rendered_history(t).back(), "Scroll down");
}

std::shared_ptr<testkit::QueueBackend> stuck_backend() {
  auto b = std::make_shared<testkit::QueueBackend>();
  b->fallback(TemplateId::LocalSubtask, "Look for it");
  b->fallback(TemplateId::CloudConfirm, "Look for it");
  b->fallback(TemplateId::LocalRank, "{\"0\": 1}");
  b->fallback(TemplateId::CloudDecide, "{\"index\": \"-1\"}");
  b->fallback(TemplateId::CloudBaseline, "{\"index\": \"-1\"}");
  return b;
}

TEST(RunTask, GiveUpAbort) {
  auto b = stuck_backend();
  llm::Gateway gw(b, b);
  RunConfig cfg;
  cfg.on_giveup = GiveUpPolicy::Abort;
  const auto t = run_fixture("clock_set_alarm", gw, cfg);
  EXPECT_EQ(t.outcome, Outcome::Exhausted);
  ASSERT_EQ(t.steps.size(), 1u);
  // The main screen is scrollable but scrolling does not change it.
  EXPECT_EQ(t.steps[0].scrolls_used, 1);
  EXPECT_EQ(t.steps[0].uploaded_elements, 10);
  EXPECT_EQ(t.steps[0].blocks_consumed, 3);
}

TEST(RunTask, GiveUpSkipStep) {
  auto b = stuck_backend();
  llm::Gateway gw(b, b);
  RunConfig cfg;
  cfg.on_giveup = GiveUpPolicy::SkipStep;
  cfg.step_limit = 2;
  const auto t = run_fixture("clock_set_alarm", gw, cfg);
  EXPECT_EQ(t.outcome, Outcome::StepLimit);
  EXPECT_EQ(t.steps.size(), 2u);
  EXPECT_EQ(rendered_history(t), (std::vector<std::string>{"LaunchApp Clock", "Scroll down", "Scroll down"}));
}

TEST(RunTask, GiveUpFinishCheck) {
  auto b = stuck_backend();
  b->push(TemplateId::CloudConfirm, "Look for it");
  b->push(TemplateId::CloudConfirm, "FINISHED");
  llm::Gateway gw(b, b);
  const auto t = run_fixture("clock_set_alarm", gw, RunConfig{});
  EXPECT_EQ(t.outcome, Outcome::Finished);
  ASSERT_EQ(t.steps.size(), 1u);
  const auto& passes = t.steps[0].passes;
  EXPECT_EQ(passes.back().kind, PassRecord::Kind::FinishCheck);
  // The finish check is not counted as an upload.
  EXPECT_EQ(t.steps[0].uploaded_elements, 10);
  EXPECT_EQ(rendered_history(t).back(), "Finish");

  auto b2 = stuck_backend();
  llm::Gateway gw2(b2, b2);
  EXPECT_EQ(run_fixture("clock_set_alarm", gw2, RunConfig{}).outcome, Outcome::Exhausted);
}

TEST(RunTask, CloudBaselineUploadsWholePage) {
  llm::Gateway gw(nullptr, testkit::make_plan_backend());
  RunConfig cfg;
  cfg.apply_mode_string("cloud_baseline");
  const auto t = run_fixture("clock_delete_alarm", gw, cfg);
  ASSERT_EQ(t.outcome, Outcome::Finished) << t.error_message;
  for (const auto& s : t.steps) EXPECT_EQ(s.uploaded_elements, s.total_elements);
  EXPECT_EQ(t.steps[0].decision->decision.action, ActionKind::LongTap);
  for (const auto& e : t.transcript) {
    EXPECT_EQ(e.exchange.role, llm::Role::Cloud);
    EXPECT_EQ(e.exchange.template_id, TemplateId::CloudBaseline);
  }
}

TEST(RunTask, LocalBaselineUploadsNothing) {
  llm::Gateway gw(testkit::make_plan_backend(), nullptr);
  RunConfig cfg;
  cfg.apply_mode_string("local_baseline");
  const auto t = run_fixture("clock_delete_alarm", gw, cfg);
  ASSERT_EQ(t.outcome, Outcome::Finished) << t.error_message;
  for (const auto& s : t.steps) {
    EXPECT_EQ(s.uploaded_elements, 0);
    EXPECT_EQ(s.cloud_usage, llm::TokenUsage{});
  }
}

TEST(RunTask, BackendErrorsEndTheTask) {
  auto scripted = std::make_shared<llm::ScriptedBackend>();
  llm::Gateway gw(scripted, scripted);
  const auto t = run_fixture("clock_set_alarm", gw, RunConfig{});
  EXPECT_EQ(t.outcome, Outcome::Error);
  EXPECT_EQ(t.error_kind, "ScriptMiss");
  EXPECT_EQ(t.steps.size(), 1u);  // the partial step is kept
}

TEST(RunTask, DivergenceEndsTheTask) {
  auto b = stuck_backend();
  b->fallback(TemplateId::CloudDecide, "{\"index\": \"0\", \"action\": \"tap\"}");
  llm::Gateway gw(b, b);
  const auto t = run_fixture("clock_set_alarm", gw, RunConfig{});
  EXPECT_EQ(t.outcome, Outcome::Error);
  EXPECT_EQ(t.error_kind, "ReplayDivergence");
}

TEST(ScrollFallback, NothingScrollableMeansNoAction) {
  const auto xml = testkit::hierarchy_xml({testkit::XNode::button("OK")});
  ScreenState s{xml, ui::parse_hierarchy(xml)};
  struct Counting final : Environment {
    int actions = 0;
    std::string xml;
    std::string capture() override { return xml; }
    void execute(const Action&) override { ++actions; }
  } env;
  env.xml = xml;
  RunConfig cfg;
  auto a = scroll_fallback(env, s, cfg);
  EXPECT_FALSE(a.acted);
  EXPECT_FALSE(a.screen);
  EXPECT_EQ(env.actions, 0);
  cfg.blind_scroll = true;
  a = scroll_fallback(env, s, cfg);
  EXPECT_TRUE(a.acted);
  EXPECT_FALSE(a.screen);  // unchanged screen
  EXPECT_EQ(env.actions, 1);
}

}  // namespace
