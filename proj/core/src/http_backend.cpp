// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

#include "coreagent/error.hpp"
#include "coreagent/gateway.hpp"

namespace coreagent::llm {

using nlohmann::json;

namespace {

std::string resolve_key(const std::string& auth) {
  if (auth.rfind("env:", 0) == 0) {
    const char* v = std::getenv(auth.c_str() + 4);
    return v ? v : "";
  }
  return auth;
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.endpoint.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = config_.endpoint.find('/', host_start);
  base_url_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "" : config_.endpoint.substr(path_start);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  constexpr std::string_view kSuffix = "/chat/completions";
  if (path_.size() < kSuffix.size() || path_.compare(path_.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) {
    path_ += kSuffix;
  }
  api_key_ = resolve_key(config_.auth);
}

Completion HttpChatBackend::complete(const CompletionRequest& request) {
  json body{{"model", config_.model_name},
            {"temperature", config_.temperature},
            {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})}};
  const std::string payload = body.dump();

  httplib::Client client(base_url_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  std::string last_error;
  bool timed_out = false;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms) * (1 << (attempt - 1)));
    }
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, payload, "application/json");
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!res) {
      timed_out = res.error() == httplib::Error::ConnectionTimeout || res.error() == httplib::Error::Read;
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw Error(ErrorKind::AuthFailure, "HTTP " + std::to_string(res->status) + " from " + base_url_);
    }
    if (res->status == 429 || res->status >= 500) {
      timed_out = false;
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorKind::BackendFailure, "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      const json doc = json::parse(res->body);
      Completion c;
      c.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
      if (doc.contains("usage") && doc["usage"].is_object()) {
        c.usage.prompt_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
        c.usage.completion_tokens = doc["usage"].value("completion_tokens", std::int64_t{0});
      } else {
        c.usage.prompt_tokens = estimate_tokens(request.prompt);
        c.usage.completion_tokens = estimate_tokens(c.text);
      }
      c.usage.wall_seconds = elapsed;
      return c;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::BackendFailure, std::string("malformed chat-completions response: ") + e.what());
    }
  }
  const std::string detail = "after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_error;
  throw Error(timed_out ? ErrorKind::Timeout : ErrorKind::Transport, detail);
}

}  // namespace coreagent::llm
