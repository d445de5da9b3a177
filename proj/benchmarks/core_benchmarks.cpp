// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>
#include <sstream>
#include <string>

#include "coreagent/metrics.hpp"
#include "coreagent/partition.hpp"
#include "coreagent/response_parser.hpp"
#include "coreagent/ui_model.hpp"

namespace {

using namespace coreagent;

/// Synthetic page: `sections` layouts, each holding `per_section` clickable rows.
std::string page_xml(int sections, int per_section) {
  std::ostringstream out;
  out << "<?xml version='1.0' encoding='UTF-8' standalone='yes' ?>\n<hierarchy rotation=\"0\">\n"
      << "<node class=\"android.widget.FrameLayout\" text=\"\" content-desc=\"\" resource-id=\"\" clickable=\"false\" "
         "bounds=\"[0,0][1080,2400]\">\n";
  for (int s = 0; s < sections; ++s) {
    out << " <node class=\"android.widget.LinearLayout\" text=\"\" content-desc=\"\" resource-id=\"app:id/sec" << s
        << "\" clickable=\"false\" bounds=\"[0," << s * 100 << "][1080," << s * 100 + 100 << "]\">\n";
    for (int r = 0; r < per_section; ++r) {
      out << "  <node class=\"android.widget.Button\" text=\"Item " << s << "." << r
          << "\" content-desc=\"\" resource-id=\"app:id/row\" clickable=\"true\" bounds=\"[0," << s * 100 << "][1080,"
          << s * 100 + 10 << "]\" />\n";
    }
    out << " </node>\n";
  }
  out << "</node>\n</hierarchy>\n";
  return out.str();
}

void BM_ParseHierarchy(benchmark::State& state) {
  const auto xml = page_xml(static_cast<int>(state.range(0)), 10);
  for (auto _ : state) benchmark::DoNotOptimize(ui::parse_hierarchy(xml));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
}
BENCHMARK(BM_ParseHierarchy)->Arg(2)->Arg(10)->Arg(50);

void BM_Partition(benchmark::State& state) {
  const auto tree = ui::parse_hierarchy(page_xml(static_cast<int>(state.range(0)), 10));
  for (auto _ : state) benchmark::DoNotOptimize(blocks::partition(tree));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tree.elements().size()));
}
BENCHMARK(BM_Partition)->Arg(2)->Arg(10)->Arg(50);

void BM_ParseRanking(benchmark::State& state) {
  const std::string reply =
      "Here are my scores.\n```json\n{\"0\": \"0.1\", \"1\": 0.25, \"2\": \"0.6\", \"3\": 0.05}\n```\nSection 2 has it.";
  for (auto _ : state) benchmark::DoNotOptimize(llm::parse_ranking(reply, 4));
}
BENCHMARK(BM_ParseRanking);

void BM_ParseDecision(benchmark::State& state) {
  const std::string reply =
      "{\"current_task\": \"Create a new alarm\", \"index\": \"8\", \"action\": \"tap\", \"input_text\": \"N/A\"}";
  for (auto _ : state) benchmark::DoNotOptimize(llm::parse_decision(reply));
}
BENCHMARK(BM_ParseDecision);

runtime::Trace synthetic_trace(int steps, double upload_share, std::mt19937& rng) {
  runtime::Trace t;
  t.task.task_id = "bench";
  std::uniform_int_distribution<int> total(5, 80);
  for (int i = 0; i < steps; ++i) {
    runtime::StepRecord s;
    s.step = i + 1;
    s.screen_hash = "screen" + std::to_string(i % 7);
    s.total_elements = total(rng);
    s.uploaded_elements = static_cast<int>(s.total_elements * upload_share);
    runtime::StepDecision d;
    d.decision.action = ActionKind::Tap;
    d.target = ui::ElementIdentity{"Item " + std::to_string(i % 5), "", "app:id/row"};
    s.decision = d;
    t.steps.push_back(s);
  }
  return t;
}

void BM_PairAndReduce(benchmark::State& state) {
  std::mt19937 rng(7);
  const auto steps = static_cast<int>(state.range(0));
  const auto base = synthetic_trace(steps, 1.0, rng);
  const auto ours = synthetic_trace(steps, 0.4, rng);
  for (auto _ : state) {
    const auto pairs = metrics::pair_steps(base, ours);
    if (!pairs.empty()) benchmark::DoNotOptimize(metrics::reduction_rate(pairs));
  }
}
BENCHMARK(BM_PairAndReduce)->Arg(10)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
