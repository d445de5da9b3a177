// SPDX-License-Identifier: Apache-2.0

#include "coreagent/runtime.hpp"

#include <regex>
#include <set>
#include <spdlog/spdlog.h>

#include "coreagent/digest.hpp"
#include "coreagent/error.hpp"
#include "coreagent/partition.hpp"
#include "coreagent/response_parser.hpp"

namespace coreagent::runtime {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Core: return "core";
    case Mode::CloudBaseline: return "cloud_baseline";
    case Mode::LocalBaseline: return "local_baseline";
  }
  return "";
}

std::string_view to_string(GiveUpPolicy p) {
  switch (p) {
    case GiveUpPolicy::FinishCheck: return "finish_check";
    case GiveUpPolicy::SkipStep: return "skip_step";
    case GiveUpPolicy::Abort: return "abort";
  }
  return "";
}

GiveUpPolicy give_up_policy_from_string(std::string_view s) {
  if (s == "finish_check") return GiveUpPolicy::FinishCheck;
  if (s == "skip_step") return GiveUpPolicy::SkipStep;
  if (s == "abort") return GiveUpPolicy::Abort;
  throw Error(ErrorKind::InvalidArgument, "unknown give-up policy '" + std::string(s) + "'");
}

void RunConfig::apply_mode_string(std::string_view spec) {
  mode = Mode::Core;
  ablations = Ablations{};
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    auto comma = spec.find(',', pos);
    if (comma == std::string_view::npos) comma = spec.size();
    const auto token = llm::trim(spec.substr(pos, comma - pos));
    pos = comma + 1;
    if (token.empty() || token == "core") continue;
    if (token == "cloud_baseline") mode = Mode::CloudBaseline;
    else if (token == "local_baseline") mode = Mode::LocalBaseline;
    else if (token == "no_partition") ablations.no_partition = true;
    else if (token == "no_coplanning") ablations.no_coplanning = true;
    else if (token == "single_block" || token == "no_multi_round") ablations.single_block = true;
    else if (token == "no_accumulation") ablations.no_accumulation = true;
    else if (token.rfind("ranking=", 0) == 0) ablations.ranking = decision::ranking_strategy_from_string(token.substr(8));
    else if (token == "basic_order") ablations.ranking = decision::RankingStrategy::BasicOrder;
    else if (token == "random_order") ablations.ranking = decision::RankingStrategy::Random;
    else throw Error(ErrorKind::InvalidArgument, "unknown mode token '" + std::string(token) + "'");
  }
  if (mode != Mode::Core && !(ablations == Ablations{})) {
    throw Error(ErrorKind::InvalidArgument, "ablations only apply to core mode");
  }
}

std::string RunConfig::mode_string() const {
  std::string out(to_string(mode));
  if (ablations.no_partition) out += ",no_partition";
  if (ablations.no_coplanning) out += ",no_coplanning";
  if (ablations.single_block) out += ",single_block";
  if (ablations.no_accumulation) out += ",no_accumulation";
  if (ablations.ranking != decision::RankingStrategy::Llm) {
    out += ",ranking=";
    out += decision::to_string(ablations.ranking);
  }
  return out;
}

std::string_view to_string(HistoryKind kind) {
  switch (kind) {
    case HistoryKind::Launch: return "launch";
    case HistoryKind::Tap: return "tap";
    case HistoryKind::LongTap: return "longtap";
    case HistoryKind::Input: return "input";
    case HistoryKind::Scroll: return "scroll";
    case HistoryKind::Finish: return "finish";
  }
  return "";
}

HistoryKind history_kind_from_string(std::string_view s) {
  for (auto k : {HistoryKind::Launch, HistoryKind::Tap, HistoryKind::LongTap, HistoryKind::Input, HistoryKind::Scroll,
                 HistoryKind::Finish}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::SchemaMismatch, "unknown history kind '" + std::string(s) + "'");
}

HistoryEntry make_history_entry(int step, const Action& action, const std::string& element_rendering) {
  HistoryEntry e;
  e.step = step;
  switch (action.kind) {
    case ActionKind::Tap:
      e.kind = HistoryKind::Tap;
      e.rendered = "Click " + element_rendering;
      break;
    case ActionKind::LongTap:
      e.kind = HistoryKind::LongTap;
      e.rendered = "LongClick " + element_rendering;
      break;
    case ActionKind::Input:
      e.kind = HistoryKind::Input;
      e.rendered = "InputText \"" + action.text + "\" " + element_rendering;
      break;
    case ActionKind::Scroll:
      e.kind = HistoryKind::Scroll;
      e.rendered = "Scroll " + (action.direction.empty() ? std::string("down") : action.direction);
      break;
    case ActionKind::Launch:
      e.kind = HistoryKind::Launch;
      e.rendered = "LaunchApp " + action.app;
      break;
  }
  return e;
}

HistoryEntry finish_entry(int step) { return HistoryEntry{step, HistoryKind::Finish, "Finish"}; }

ParsedHistory parse_history_entry(std::string_view rendered) {
  const auto sp = rendered.find(' ');
  const auto verb = rendered.substr(0, sp);
  ParsedHistory out{HistoryKind::Finish, std::nullopt};
  if (verb == "LaunchApp") out.kind = HistoryKind::Launch;
  else if (verb == "Click") out.kind = HistoryKind::Tap;
  else if (verb == "LongClick") out.kind = HistoryKind::LongTap;
  else if (verb == "InputText") out.kind = HistoryKind::Input;
  else if (verb == "Scroll") out.kind = HistoryKind::Scroll;
  else if (verb == "Finish") out.kind = HistoryKind::Finish;
  else throw Error(ErrorKind::SchemaMismatch, "unrecognised history entry '" + std::string(rendered) + "'");
  if (out.kind == HistoryKind::Tap || out.kind == HistoryKind::LongTap || out.kind == HistoryKind::Input) {
    static const std::regex kIndex(R"( index=(\d+)></[a-z]+>$)");
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(rendered.begin(), rendered.end(), m, kIndex)) out.element_index = std::stoi(m[1].str());
  }
  return out;
}

std::string_view to_string(PassRecord::Kind kind) {
  switch (kind) {
    case PassRecord::Kind::Decision: return "decision";
    case PassRecord::Kind::Exhausted: return "exhausted";
    case PassRecord::Kind::Finished: return "finished";
    case PassRecord::Kind::FinishCheck: return "finish_check";
  }
  return "";
}

PassRecord::Kind pass_kind_from_string(std::string_view s) {
  for (auto k : {PassRecord::Kind::Decision, PassRecord::Kind::Exhausted, PassRecord::Kind::Finished,
                 PassRecord::Kind::FinishCheck}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::SchemaMismatch, "unknown pass kind '" + std::string(s) + "'");
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Finished: return "finished";
    case Outcome::StepLimit: return "step_limit";
    case Outcome::Exhausted: return "exhausted";
    case Outcome::Error: return "error";
  }
  return "";
}

Outcome outcome_from_string(std::string_view s) {
  for (auto o : {Outcome::Finished, Outcome::StepLimit, Outcome::Exhausted, Outcome::Error}) {
    if (to_string(o) == s) return o;
  }
  throw Error(ErrorKind::SchemaMismatch, "unknown outcome '" + std::string(s) + "'");
}

std::uint64_t step_seed(std::uint64_t run_seed, const std::string& task_id, int step, int pass) {
  const auto hex = sha256_hex(std::to_string(run_seed) + "/" + task_id + "/" + std::to_string(step) + "/" +
                              std::to_string(pass));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

ScrollAttempt scroll_fallback(Environment& env, const ScreenState& current, const RunConfig& cfg) {
  ScrollAttempt attempt;
  if (!current.tree.has_scrollable() && !cfg.blind_scroll) return attempt;
  env.execute(Action::scroll(cfg.scroll_direction));
  attempt.acted = true;
  std::string xml = env.capture();
  ui::UiTree tree = ui::parse_hierarchy(xml);
  if (tree.screen_digest() == current.tree.screen_digest()) return attempt;
  attempt.screen = ScreenState{std::move(xml), std::move(tree)};
  return attempt;
}

namespace {

struct FinishedTag {};

struct PassOutcome {
  PassRecord record;
  std::variant<decision::Decision, std::monostate, FinishedTag> result = std::monostate{};
  std::vector<llm::Exchange> exchanges;
  std::vector<std::string> notes;
};

blocks::Partition with_placeholder_block(blocks::Partition p, const ui::UiTree& tree) {
  if (p.degenerate && p.blocks.empty()) {
    blocks::Block empty;
    empty.block_id = 0;
    empty.anchor_node = tree.root().node_id;
    p.blocks.push_back(std::move(empty));
  }
  return p;
}

class TaskRunner {
 public:
  TaskRunner(const TaskSpec& spec, Environment& env, const llm::Gateway& gateway, const RunConfig& cfg)
      : spec_(spec), env_(env), gateway_(gateway), cfg_(cfg) {
    trace_.task = spec;
  }

  Trace run() {
    try {
      if (!spec_.launch.empty()) {
        env_.execute(Action::launch(spec_.launch));
        auto entry = make_history_entry(0, Action::launch(spec_.app.empty() ? spec_.launch : spec_.app), "");
        trace_.history.push_back(std::move(entry));
      }
      trace_.outcome = Outcome::StepLimit;
      for (int step = 1; step <= cfg_.step_limit; ++step) {
        if (!run_step(step)) break;
      }
    } catch (const Error& e) {
      fail(std::string(to_string(e.kind())), e.what());
    } catch (const std::exception& e) {
      fail("Internal", e.what());
    }
    return std::move(trace_);
  }

 private:
  void fail(std::string kind, std::string message) {
    spdlog::error("task {} failed: {}", spec_.task_id, message);
    if (current_) commit();
    trace_.outcome = Outcome::Error;
    trace_.error_kind = std::move(kind);
    trace_.error_message = std::move(message);
  }

  ScreenState capture() {
    std::string xml = env_.capture();
    ui::UiTree tree = ui::parse_hierarchy(xml);
    visit(xml, tree);
    return ScreenState{std::move(xml), std::move(tree)};
  }

  void visit(const std::string& xml, const ui::UiTree& tree) {
    trace_.visited_screens.push_back(VisitedScreen{tree.screen_digest(), tree.source_hash(), xml});
  }

  std::string history_binding() const {
    std::vector<std::string> lines;
    lines.reserve(trace_.history.size());
    for (const auto& h : trace_.history) lines.push_back(h.rendered);
    return llm::format_history(lines);
  }

  void absorb(PassOutcome& po, int pass_no) {
    StepRecord& sr = *current_;
    for (auto& ex : po.exchanges) {
      (ex.role == llm::Role::Local ? sr.local_usage : sr.cloud_usage) += ex.usage;
      trace_.transcript.push_back(TranscriptEntry{sr.step, pass_no, std::move(ex)});
    }
    for (auto& n : po.notes) sr.notes.push_back(std::move(n));
    if (po.record.subtask) sr.subtask = po.record.subtask;
    sr.screen_hash = po.record.screen_hash;
    sr.passes.push_back(po.record);
  }

  void commit() {
    StepRecord& sr = *current_;
    sr.total_elements = sr.uploaded_elements = sr.blocks_total = sr.blocks_consumed = 0;
    for (const auto& p : sr.passes) {
      if (p.kind == PassRecord::Kind::FinishCheck) continue;
      sr.total_elements += p.total_elements;
      sr.uploaded_elements += p.uploaded_elements;
      sr.blocks_total += p.blocks_total;
      sr.blocks_consumed += p.blocks_consumed;
    }
    trace_.steps.push_back(std::move(sr));
    current_.reset();
  }

  PassOutcome baseline_pass(const ScreenState& screen) {
    PassOutcome po;
    const auto& tree = screen.tree;
    auto partition = with_placeholder_block(blocks::single_block(tree), tree);
    decision::AccumulationOptions opts;
    opts.multi_round = false;
    opts.honor_finished = true;
    opts.template_id = llm::TemplateId::CloudBaseline;
    opts.role = cfg_.mode == Mode::CloudBaseline ? llm::Role::Cloud : llm::Role::Local;
    auto res = decision::decide_with_accumulation(gateway_, spec_.description, history_binding(), partition,
                                                  decision::ranking_from_scores({1.0}), opts, po.exchanges);
    po.record.blocks_total = 1;
    po.record.blocks_consumed = 1;
    po.record.ranking_order = {0};
    if (cfg_.mode == Mode::CloudBaseline) {
      po.record.uploaded_elements = static_cast<int>(tree.elements().size());
      po.record.uploaded_indices = partition.blocks[0].element_indices;
    }
    finish_result(po, std::move(res));
    return po;
  }

  PassOutcome core_pass(const ScreenState& screen, int step, int pass_no) {
    PassOutcome po;
    const auto& tree = screen.tree;
    const auto& ab = cfg_.ablations;
    blocks::Partition partition =
        ab.no_partition ? blocks::equal_split(tree, blocks::kDefaultBlockThreshold)
                        : blocks::partition(tree, blocks::PartitionOptions{cfg_.block_threshold, cfg_.max_blocks});
    partition = with_placeholder_block(std::move(partition), tree);
    po.record.blocks_total = static_cast<int>(partition.blocks.size());
    const std::string history = history_binding();

    std::string subtask = spec_.description;
    if (!ab.no_coplanning) {
      auto candidates = planning::generate_candidates(gateway_, spec_.description, history, partition, po.exchanges);
      for (const auto& c : candidates) {
        if (c.flagged) po.notes.push_back("block " + std::to_string(c.block_id) + ": sentinel sub-task candidate");
      }
      auto confirmed = planning::confirm_subtask(gateway_, spec_.description, history, candidates, po.exchanges);
      po.record.subtask = confirmed;
      if (confirmed.kind == planning::ConfirmKind::Finished) {
        po.record.kind = PassRecord::Kind::Finished;
        po.result = FinishedTag{};
        return po;
      }
      subtask = confirmed.text;
    }

    auto ranking = decision::rank_blocks(gateway_, subtask, partition, ab.ranking,
                                         step_seed(cfg_.seed, spec_.task_id, step, pass_no), po.exchanges);
    if (ranking.fallback) po.notes.push_back("ranking fallback: uniform scores");
    po.record.ranking_order = ranking.order;

    decision::AccumulationOptions opts;
    opts.accumulate = !ab.no_accumulation;
    opts.multi_round = !ab.single_block;
    opts.honor_finished = ab.no_coplanning;
    auto res = decision::decide_with_accumulation(gateway_, spec_.description, history, partition, ranking, opts,
                                                  po.exchanges);
    po.record.blocks_consumed = static_cast<int>(res.uploaded.size());
    for (int id : res.uploaded) {
      const auto& b = partition.block(id);
      po.record.uploaded_indices.insert(po.record.uploaded_indices.end(), b.element_indices.begin(),
                                        b.element_indices.end());
    }
    std::sort(po.record.uploaded_indices.begin(), po.record.uploaded_indices.end());
    po.record.uploaded_elements = static_cast<int>(po.record.uploaded_indices.size());
    finish_result(po, std::move(res));
    return po;
  }

  static void finish_result(PassOutcome& po, decision::AccumulationResult res) {
    for (auto& n : res.notes) po.notes.push_back(std::move(n));
    if (auto* d = std::get_if<decision::Decision>(&res.outcome)) {
      po.record.kind = PassRecord::Kind::Decision;
      po.result = *d;
    } else if (std::holds_alternative<decision::FinishedSignal>(res.outcome)) {
      po.record.kind = PassRecord::Kind::Finished;
      po.result = FinishedTag{};
    } else {
      po.record.kind = PassRecord::Kind::Exhausted;
      po.result = std::monostate{};
    }
  }

  PassOutcome run_pass(const ScreenState& screen, int step, int pass_no) {
    PassOutcome po = cfg_.mode == Mode::Core ? core_pass(screen, step, pass_no) : baseline_pass(screen);
    po.record.screen_hash = screen.tree.screen_digest();
    po.record.total_elements = static_cast<int>(screen.tree.elements().size());
    return po;
  }

  bool planner_available() const { return cfg_.mode == Mode::Core && !cfg_.ablations.no_coplanning; }

  // Planner-only pass after giving up on a step; true when it declared FINISHED.
  bool finish_check(const ScreenState& screen, int pass_no) {
    PassOutcome po;
    auto partition = cfg_.ablations.no_partition
                         ? blocks::equal_split(screen.tree, blocks::kDefaultBlockThreshold)
                         : blocks::partition(screen.tree, {cfg_.block_threshold, cfg_.max_blocks});
    partition = with_placeholder_block(std::move(partition), screen.tree);
    const std::string history = history_binding();
    auto candidates = planning::generate_candidates(gateway_, spec_.description, history, partition, po.exchanges);
    auto confirmed = planning::confirm_subtask(gateway_, spec_.description, history, candidates, po.exchanges);
    po.record.kind = PassRecord::Kind::FinishCheck;
    po.record.screen_hash = screen.tree.screen_digest();
    po.record.total_elements = static_cast<int>(screen.tree.elements().size());
    po.record.blocks_total = static_cast<int>(partition.blocks.size());
    po.record.subtask = confirmed;
    absorb(po, pass_no);
    return confirmed.kind == planning::ConfirmKind::Finished;
  }

  void execute_decision(const ScreenState& screen, const decision::Decision& d, int step) {
    const ui::UiElement* element = screen.tree.element(d.element_index);
    if (element == nullptr) {
      throw Error(ErrorKind::InvalidArgument, "decision references unknown element " + std::to_string(d.element_index));
    }
    Action action;
    action.kind = d.action;
    action.element_index = d.element_index;
    action.text = d.input_text;
    action.x = element->bounds.center_x();
    action.y = element->bounds.center_y();
    env_.execute(action);
    trace_.history.push_back(make_history_entry(step, action, element->rendered));
    current_->decision = StepDecision{d, screen.tree.identity(d.element_index), element->rendered};
  }

  // Returns false when the task loop must stop.
  bool run_step(int step) {
    current_ = StepRecord{};
    current_->step = step;
    ScreenState screen = capture();
    int pass_no = 0;
    for (;;) {
      PassOutcome po = run_pass(screen, step, pass_no);
      auto result = po.result;
      absorb(po, pass_no);

      if (std::holds_alternative<FinishedTag>(result)) {
        trace_.history.push_back(finish_entry(step));
        commit();
        trace_.outcome = Outcome::Finished;
        return false;
      }
      if (auto* d = std::get_if<decision::Decision>(&result)) {
        execute_decision(screen, *d, step);
        commit();
        return true;
      }

      // Exhausted: scroll and retry on the new screen, within the budget.
      std::optional<ScreenState> next;
      if (current_->scrolls_used < cfg_.max_scrolls) {
        ScrollAttempt attempt = scroll_fallback(env_, screen, cfg_);
        if (attempt.acted) ++current_->scrolls_used;
        if (attempt.screen) {
          visit(attempt.screen->xml, attempt.screen->tree);
          next = std::move(attempt.screen);
        }
      }
      if (next) {
        screen = std::move(*next);
        ++pass_no;
        continue;
      }
      return give_up(screen, step, pass_no + 1);
    }
  }

  bool give_up(const ScreenState& screen, int step, int pass_no) {
    current_->notes.push_back("gave up after " + std::to_string(current_->scrolls_used) + " scroll(s)");
    const bool scrolled = current_->scrolls_used > 0;
    auto scroll_entry = make_history_entry(step, Action::scroll(cfg_.scroll_direction), "");

    switch (cfg_.on_giveup) {
      case GiveUpPolicy::FinishCheck:
        if (planner_available() && finish_check(screen, pass_no)) {
          trace_.history.push_back(finish_entry(step));
          commit();
          trace_.outcome = Outcome::Finished;
          return false;
        }
        [[fallthrough]];
      case GiveUpPolicy::Abort:
        if (scrolled) trace_.history.push_back(scroll_entry);
        commit();
        trace_.outcome = Outcome::Exhausted;
        return false;
      case GiveUpPolicy::SkipStep:
        if (scrolled) trace_.history.push_back(scroll_entry);
        commit();
        return true;
    }
    return false;
  }

  const TaskSpec& spec_;
  Environment& env_;
  const llm::Gateway& gateway_;
  const RunConfig& cfg_;
  Trace trace_;
  std::optional<StepRecord> current_;
};

}  // namespace

Trace run_task(const TaskSpec& spec, Environment& env, const llm::Gateway& gateway, const RunConfig& cfg) {
  if (cfg.step_limit < 1) throw Error(ErrorKind::InvalidArgument, "step_limit must be >= 1");
  if (cfg.max_scrolls < 0) throw Error(ErrorKind::InvalidArgument, "max_scrolls must be >= 0");
  return TaskRunner(spec, env, gateway, cfg).run();
}

}  // namespace coreagent::runtime
