// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coreagent/prompts.hpp"

namespace coreagent::llm {

enum class Role { Local, Cloud };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double wall_seconds = 0.0;

  TokenUsage& operator+=(const TokenUsage& other) {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    wall_seconds += other.wall_seconds;
    return *this;
  }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct CompletionRequest {
  Role role = Role::Local;
  TemplateId template_id = TemplateId::LocalSubtask;
  std::string prompt;
};

struct Completion {
  std::string text;
  TokenUsage usage;
};

/// One prompt/response pair as it crossed the gateway.
struct Exchange {
  Role role = Role::Local;
  TemplateId template_id = TemplateId::LocalSubtask;
  std::string digest;
  std::string prompt;
  std::string response;
  TokenUsage usage;
  /// Non-empty when the call failed and a fallback was substituted.
  std::string error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
};

/// Key used by scripted backends: SHA-256 over role, template and the
/// canonicalised prompt (LF line endings, trailing blanks stripped).
std::string script_digest(Role role, TemplateId template_id, std::string_view prompt);
std::string canonicalize_prompt(std::string_view prompt);

/// Rough token estimate used where a backend reports no usage (4 bytes/token).
std::int64_t estimate_tokens(std::string_view text);

struct ScriptRecord {
  std::string digest;
  Role role = Role::Local;
  std::string template_name;
  std::string response_text;
  /// Optional; when present the digest is verified against it on load.
  std::string prompt;
};

/// Deterministic digest -> response table standing in for a live model.
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(bool lenient = false) : lenient_(lenient) {}

  /// Loads every *.json manifest in a directory (sorted), or a single manifest file.
  static std::shared_ptr<ScriptedBackend> load(const std::filesystem::path& path, bool lenient = false);

  void add(ScriptRecord record);
  Completion complete(const CompletionRequest& request) override;

  [[nodiscard]] std::size_t size() const { return records_.size(); }
  /// Requests that had no record (only populated in lenient mode).
  [[nodiscard]] std::vector<ScriptRecord> misses() const;

 private:
  bool lenient_;
  std::map<std::string, ScriptRecord> records_;
  mutable std::mutex miss_mutex_;
  std::vector<ScriptRecord> misses_;
};

void write_manifest(const std::filesystem::path& file, std::vector<ScriptRecord> records);
std::vector<ScriptRecord> read_manifest(const std::filesystem::path& file);

/// Wraps a backend and remembers every exchange as a script record, so a live
/// or synthetic session can be replayed offline later.
class RecordingBackend final : public ChatBackend {
 public:
  explicit RecordingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
  Completion complete(const CompletionRequest& request) override;
  [[nodiscard]] std::vector<ScriptRecord> records() const;

 private:
  std::shared_ptr<ChatBackend> inner_;
  mutable std::mutex mutex_;
  std::map<std::string, ScriptRecord> records_;
};

/// Backend driven by a callable; handy for synthetic responders.
class FunctionBackend final : public ChatBackend {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  Completion complete(const CompletionRequest& request) override;

 private:
  Fn fn_;
};

enum class BackendKind { HttpChat, Scripted };

struct BackendConfig {
  Role role = Role::Local;
  BackendKind kind = BackendKind::Scripted;
  std::string endpoint;
  std::string model_name;
  /// "env:NAME" reads the key from the environment; anything else is the key itself.
  std::string auth;
  double temperature = 0.0;
  int timeout_ms = 60000;
  int max_retries = 3;
  int backoff_ms = 500;
  std::string script_path;

  /// Throws InvalidArgument when required fields for the kind are missing.
  void validate() const;
  /// False for an untouched default (scripted without a script path).
  [[nodiscard]] bool configured() const {
    return kind == BackendKind::HttpChat ? !endpoint.empty() : !script_path.empty();
  }
};

struct GatewayConfig {
  BackendConfig local;
  BackendConfig cloud;
  int max_concurrency = 4;
  bool lenient = false;
};

/// Reads a JSON config file (empty path = defaults) and applies the CORE_*
/// environment overrides on top.
GatewayConfig load_gateway_config(const std::filesystem::path& file);
void apply_env_overrides(GatewayConfig& config);

/// OpenAI-compatible chat-completions client with retry and backoff.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config);
  Completion complete(const CompletionRequest& request) override;

 private:
  BackendConfig config_;
  std::string base_url_;
  std::string path_;
  std::string api_key_;
};

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config, bool lenient);

/// Role-addressed front door to the two models; caps in-flight requests per role.
class Gateway {
 public:
  explicit Gateway(int max_concurrency = 4);
  Gateway(std::shared_ptr<ChatBackend> local, std::shared_ptr<ChatBackend> cloud, int max_concurrency = 4);

  static Gateway from_config(const GatewayConfig& config);

  void set_backend(Role role, std::shared_ptr<ChatBackend> backend);
  [[nodiscard]] bool has_backend(Role role) const;

  /// Renders nothing; sends the prompt to the role's backend and packages the
  /// exchange. Backend exceptions propagate.
  Exchange complete(Role role, TemplateId template_id, std::string prompt) const;

  [[nodiscard]] int max_concurrency() const { return max_concurrency_; }

 private:
  class Limiter {
   public:
    explicit Limiter(int slots) : slots_(slots) {}
    void acquire();
    void release();

   private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int slots_;
  };

  std::shared_ptr<ChatBackend> local_;
  std::shared_ptr<ChatBackend> cloud_;
  int max_concurrency_;
  std::shared_ptr<Limiter> local_limit_;
  std::shared_ptr<Limiter> cloud_limit_;
};

}  // namespace coreagent::llm
