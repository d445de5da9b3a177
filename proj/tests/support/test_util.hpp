// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coreagent/gateway.hpp"
#include "coreagent/runtime.hpp"

namespace coreagent::testkit {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("coreagent_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

/// Minimal uiautomator-style XML writer for synthetic screens.
struct XNode {
  std::string cls = "android.widget.FrameLayout";
  std::string text;
  std::string desc;
  std::string rid;
  bool clickable = false;
  bool long_clickable = false;
  bool scrollable = false;
  std::string bounds = "[0,0][100,100]";
  std::vector<XNode> children;

  static XNode layout(std::vector<XNode> kids, std::string rid = {}) {
    XNode n;
    n.cls = "android.widget.LinearLayout";
    n.rid = std::move(rid);
    n.children = std::move(kids);
    return n;
  }
  static XNode button(std::string text, std::string bounds = "[0,0][100,100]") {
    XNode n;
    n.cls = "android.widget.Button";
    n.text = std::move(text);
    n.clickable = true;
    n.bounds = std::move(bounds);
    return n;
  }
  static XNode label(std::string text) {
    XNode n;
    n.cls = "android.widget.TextView";
    n.text = std::move(text);
    return n;
  }
};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void write_xnode(std::ostringstream& out, const XNode& n, int depth) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  out << pad << "<node class=\"" << n.cls << "\" text=\"" << xml_escape(n.text) << "\" content-desc=\""
      << xml_escape(n.desc) << "\" resource-id=\"" << xml_escape(n.rid) << "\" clickable=\""
      << (n.clickable ? "true" : "false") << "\" long-clickable=\"" << (n.long_clickable ? "true" : "false")
      << "\" scrollable=\"" << (n.scrollable ? "true" : "false") << "\" enabled=\"true\" bounds=\"" << n.bounds
      << "\"";
  if (n.children.empty()) {
    out << " />\n";
    return;
  }
  out << ">\n";
  for (const auto& c : n.children) write_xnode(out, c, depth + 1);
  out << pad << "</node>\n";
}

inline std::string hierarchy_xml(const std::vector<XNode>& top) {
  std::ostringstream out;
  out << "<?xml version='1.0' encoding='UTF-8' standalone='yes' ?>\n<hierarchy rotation=\"0\">\n";
  for (const auto& n : top) write_xnode(out, n, 1);
  out << "</hierarchy>\n";
  return out.str();
}

/// Backend answering each template from its own FIFO queue and logging prompts.
/// An empty queue answers with the template's fallback (or throws if none).
class QueueBackend final : public llm::ChatBackend {
 public:
  void push(llm::TemplateId t, std::string response) {
    std::lock_guard lock(mutex_);
    queues_[t].push_back(std::move(response));
  }
  void fallback(llm::TemplateId t, std::string response) {
    std::lock_guard lock(mutex_);
    fallbacks_[t] = std::move(response);
  }
  /// Answer computed from the prompt; takes precedence over queues.
  void responder(llm::TemplateId t, std::function<std::string(const std::string&)> fn) {
    std::lock_guard lock(mutex_);
    responders_[t] = std::move(fn);
  }

  llm::Completion complete(const llm::CompletionRequest& r) override {
    std::lock_guard lock(mutex_);
    requests_.push_back(r);
    std::string text;
    if (auto rit = responders_.find(r.template_id); rit != responders_.end()) {
      text = rit->second(r.prompt);
    } else if (auto& q = queues_[r.template_id]; !q.empty()) {
      text = q.front();
      q.pop_front();
    } else if (auto fit = fallbacks_.find(r.template_id); fit != fallbacks_.end()) {
      text = fit->second;
    } else {
      throw std::runtime_error("QueueBackend: no response for " + std::string(llm::template_name(r.template_id)));
    }
    return llm::Completion{text, llm::TokenUsage{llm::estimate_tokens(r.prompt), llm::estimate_tokens(text), 0.0}};
  }

  [[nodiscard]] std::vector<llm::CompletionRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  [[nodiscard]] std::vector<llm::CompletionRequest> requests(llm::TemplateId t) const {
    std::lock_guard lock(mutex_);
    std::vector<llm::CompletionRequest> out;
    for (const auto& r : requests_) {
      if (r.template_id == t) out.push_back(r);
    }
    return out;
  }

 private:
  mutable std::mutex mutex_;
  std::map<llm::TemplateId, std::deque<std::string>> queues_;
  std::map<llm::TemplateId, std::string> fallbacks_;
  std::map<llm::TemplateId, std::function<std::string(const std::string&)>> responders_;
  std::vector<llm::CompletionRequest> requests_;
};

/// Synthetic step that executed `kind` on an element with the given text.
inline runtime::StepRecord decided_step(int step, const std::string& screen, int total, int uploaded,
                                        const std::string& target_text, ActionKind kind = ActionKind::Tap,
                                        const std::string& input = {}) {
  runtime::StepRecord s;
  s.step = step;
  s.screen_hash = screen;
  s.total_elements = total;
  s.uploaded_elements = uploaded;
  s.blocks_total = 1;
  s.blocks_consumed = 1;
  runtime::StepDecision d;
  d.decision.element_index = 0;
  d.decision.action = kind;
  d.decision.input_text = input;
  d.decision.blocks_consumed = 1;
  d.target = ui::ElementIdentity{target_text, "", ""};
  s.decision = d;
  runtime::PassRecord p;
  p.kind = runtime::PassRecord::Kind::Decision;
  p.screen_hash = screen;
  p.total_elements = total;
  p.uploaded_elements = uploaded;
  p.blocks_total = 1;
  p.blocks_consumed = 1;
  s.passes.push_back(p);
  return s;
}

inline runtime::Trace synthetic_trace(const std::string& task_id, std::vector<runtime::StepRecord> steps) {
  runtime::Trace t;
  t.task.task_id = task_id;
  t.steps = std::move(steps);
  t.outcome = runtime::Outcome::Finished;
  return t;
}

}  // namespace coreagent::testkit
