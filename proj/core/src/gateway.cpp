// SPDX-License-Identifier: Apache-2.0

#include "coreagent/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "coreagent/digest.hpp"
#include "coreagent/error.hpp"

namespace coreagent::llm {

using nlohmann::json;

std::string_view to_string(Role role) { return role == Role::Local ? "local" : "cloud"; }

Role role_from_string(std::string_view s) {
  if (s == "local") return Role::Local;
  if (s == "cloud") return Role::Cloud;
  throw Error(ErrorKind::SchemaMismatch, "unknown role '" + std::string(s) + "'");
}

std::string canonicalize_prompt(std::string_view prompt) {
  std::string out;
  out.reserve(prompt.size());
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    auto nl = prompt.find('\n', pos);
    if (nl == std::string_view::npos) nl = prompt.size();
    std::string_view line = prompt.substr(pos, nl - pos);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.remove_suffix(1);
    out.append(line);
    if (nl < prompt.size()) out += '\n';
    pos = nl + 1;
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

std::string script_digest(Role role, TemplateId template_id, std::string_view prompt) {
  std::string keyed;
  keyed += to_string(role);
  keyed += '\n';
  keyed += template_name(template_id);
  keyed += '\n';
  keyed += canonicalize_prompt(prompt);
  return sha256_hex(keyed);
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------------------
// Scripted backend

void ScriptedBackend::add(ScriptRecord record) {
  auto [it, inserted] = records_.try_emplace(record.digest, record);
  if (!inserted && it->second.response_text != record.response_text) {
    throw Error(ErrorKind::SchemaMismatch, "conflicting script records for digest " + record.digest);
  }
}

Completion ScriptedBackend::complete(const CompletionRequest& request) {
  const std::string digest = script_digest(request.role, request.template_id, request.prompt);
  auto it = records_.find(digest);
  if (it == records_.end()) {
    if (!lenient_) {
      throw Error(ErrorKind::ScriptMiss, "no scripted response for digest " + digest + " (" +
                                             std::string(to_string(request.role)) + "/" +
                                             std::string(template_name(request.template_id)) + ")");
    }
    std::lock_guard lock(miss_mutex_);
    misses_.push_back(ScriptRecord{digest, request.role, std::string(template_name(request.template_id)), "",
                                   request.prompt});
    return Completion{"", TokenUsage{estimate_tokens(request.prompt), 0, 0.0}};
  }
  const auto& text = it->second.response_text;
  return Completion{text, TokenUsage{estimate_tokens(request.prompt), estimate_tokens(text), 0.0}};
}

std::vector<ScriptRecord> ScriptedBackend::misses() const {
  std::lock_guard lock(miss_mutex_);
  return misses_;
}

std::vector<ScriptRecord> read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::SchemaMismatch, "cannot open script manifest " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, file.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array()) {
    throw Error(ErrorKind::SchemaMismatch, file.string() + ": expected an object with a 'records' array");
  }
  std::vector<ScriptRecord> out;
  for (const auto& r : doc["records"]) {
    try {
      ScriptRecord rec;
      rec.digest = r.at("digest").get<std::string>();
      rec.role = role_from_string(r.at("role").get<std::string>());
      rec.template_name = r.value("template", "");
      rec.response_text = r.at("response_text").get<std::string>();
      rec.prompt = r.value("prompt", "");
      if (!rec.prompt.empty()) {
        const auto expected = script_digest(rec.role, template_from_name(rec.template_name), rec.prompt);
        if (expected != rec.digest) {
          throw Error(ErrorKind::SchemaMismatch, "digest " + rec.digest + " does not match its recorded prompt");
        }
      }
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaMismatch, file.string() + ": bad record: " + e.what());
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& file, std::vector<ScriptRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.digest < b.digest; });
  json arr = json::array();
  for (const auto& r : records) {
    json j{{"digest", r.digest},
           {"role", std::string(to_string(r.role))},
           {"template", r.template_name},
           {"response_text", r.response_text}};
    if (!r.prompt.empty()) j["prompt"] = r.prompt;
    arr.push_back(std::move(j));
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  out << json{{"version", 1}, {"records", arr}}.dump(2) << '\n';
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path, bool lenient) {
  auto backend = std::make_shared<ScriptedBackend>(lenient);
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (std::filesystem::is_regular_file(path)) {
    files.push_back(path);
  } else {
    throw Error(ErrorKind::SchemaMismatch, "script path not found: " + path.string());
  }
  for (const auto& f : files) {
    for (auto& rec : read_manifest(f)) backend->add(std::move(rec));
  }
  return backend;
}

// ---------------------------------------------------------------------------

Completion RecordingBackend::complete(const CompletionRequest& request) {
  Completion c = inner_->complete(request);
  ScriptRecord rec{script_digest(request.role, request.template_id, request.prompt), request.role,
                   std::string(template_name(request.template_id)), c.text, request.prompt};
  std::lock_guard lock(mutex_);
  records_.insert_or_assign(rec.digest, std::move(rec));
  return c;
}

std::vector<ScriptRecord> RecordingBackend::records() const {
  std::lock_guard lock(mutex_);
  std::vector<ScriptRecord> out;
  for (const auto& [_, r] : records_) out.push_back(r);
  return out;
}

Completion FunctionBackend::complete(const CompletionRequest& request) {
  std::string text = fn_(request);
  TokenUsage usage{estimate_tokens(request.prompt), estimate_tokens(text), 0.0};
  return Completion{std::move(text), usage};
}

// ---------------------------------------------------------------------------
// Configuration

void BackendConfig::validate() const {
  const std::string who = std::string(to_string(role)) + " backend";
  if (kind == BackendKind::HttpChat) {
    if (endpoint.empty()) throw Error(ErrorKind::InvalidArgument, who + ": http_chat requires an endpoint");
    if (model_name.empty()) throw Error(ErrorKind::InvalidArgument, who + ": http_chat requires a model name");
  } else if (script_path.empty()) {
    throw Error(ErrorKind::InvalidArgument, who + ": scripted backend requires script_path");
  }
  if (max_retries < 0 || timeout_ms <= 0) throw Error(ErrorKind::InvalidArgument, who + ": bad retry/timeout");
}

namespace {

BackendConfig backend_from_json(const json& j, Role role) {
  BackendConfig c;
  c.role = role;
  const std::string kind = j.value("kind", "scripted");
  if (kind == "http_chat") c.kind = BackendKind::HttpChat;
  else if (kind == "scripted") c.kind = BackendKind::Scripted;
  else throw Error(ErrorKind::SchemaMismatch, "unknown backend kind '" + kind + "'");
  c.endpoint = j.value("endpoint", "");
  c.model_name = j.value("model", "");
  c.auth = j.value("auth", "");
  c.temperature = j.value("temperature", 0.0);
  c.timeout_ms = j.value("timeout_ms", 60000);
  c.max_retries = j.value("max_retries", 3);
  c.backoff_ms = j.value("backoff_ms", 500);
  c.script_path = j.value("script_path", "");
  return c;
}

void override_from_env(BackendConfig& c, const char* prefix) {
  auto get = [&](const char* suffix) -> const char* {
    const std::string name = std::string(prefix) + suffix;
    return std::getenv(name.c_str());
  };
  if (const char* v = get("_ENDPOINT")) {
    c.endpoint = v;
    c.kind = BackendKind::HttpChat;
  }
  if (const char* v = get("_MODEL")) c.model_name = v;
  if (const char* v = get("_KEY")) c.auth = v;
}

}  // namespace

void apply_env_overrides(GatewayConfig& config) {
  override_from_env(config.local, "CORE_LOCAL");
  override_from_env(config.cloud, "CORE_CLOUD");
}

GatewayConfig load_gateway_config(const std::filesystem::path& file) {
  GatewayConfig config;
  config.local.role = Role::Local;
  config.cloud.role = Role::Cloud;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::SchemaMismatch, "cannot open config " + file.string());
    json doc;
    try {
      doc = json::parse(in);
      if (doc.contains("local")) config.local = backend_from_json(doc["local"], Role::Local);
      if (doc.contains("cloud")) config.cloud = backend_from_json(doc["cloud"], Role::Cloud);
      config.max_concurrency = doc.value("max_concurrency", 4);
      config.lenient = doc.value("lenient", false);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaMismatch, file.string() + ": " + e.what());
    }
  }
  apply_env_overrides(config);
  return config;
}

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config, bool lenient) {
  config.validate();
  if (config.kind == BackendKind::HttpChat) return std::make_shared<HttpChatBackend>(config);
  return ScriptedBackend::load(config.script_path, lenient);
}

// ---------------------------------------------------------------------------
// Gateway

void Gateway::Limiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return slots_ > 0; });
  --slots_;
}

void Gateway::Limiter::release() {
  {
    std::lock_guard lock(mutex_);
    ++slots_;
  }
  cv_.notify_one();
}

Gateway::Gateway(int max_concurrency)
    : max_concurrency_(std::max(1, max_concurrency)),
      local_limit_(std::make_shared<Limiter>(max_concurrency_)),
      cloud_limit_(std::make_shared<Limiter>(max_concurrency_)) {}

Gateway::Gateway(std::shared_ptr<ChatBackend> local, std::shared_ptr<ChatBackend> cloud, int max_concurrency)
    : Gateway(max_concurrency) {
  local_ = std::move(local);
  cloud_ = std::move(cloud);
}

Gateway Gateway::from_config(const GatewayConfig& config) {
  // A role left unconfigured surfaces as BackendFailure on first use.
  Gateway gw(config.max_concurrency);
  if (config.local.configured()) gw.set_backend(Role::Local, make_backend(config.local, config.lenient));
  if (config.cloud.configured()) gw.set_backend(Role::Cloud, make_backend(config.cloud, config.lenient));
  return gw;
}

void Gateway::set_backend(Role role, std::shared_ptr<ChatBackend> backend) {
  (role == Role::Local ? local_ : cloud_) = std::move(backend);
}

bool Gateway::has_backend(Role role) const { return (role == Role::Local ? local_ : cloud_) != nullptr; }

Exchange Gateway::complete(Role role, TemplateId template_id, std::string prompt) const {
  const auto& backend = role == Role::Local ? local_ : cloud_;
  if (!backend) {
    throw Error(ErrorKind::BackendFailure, "no backend configured for role " + std::string(to_string(role)));
  }
  Limiter& limiter = role == Role::Local ? *local_limit_ : *cloud_limit_;
  CompletionRequest request{role, template_id, std::move(prompt)};
  limiter.acquire();
  Completion completion;
  try {
    completion = backend->complete(request);
  } catch (...) {
    limiter.release();
    throw;
  }
  limiter.release();
  Exchange ex;
  ex.role = role;
  ex.template_id = template_id;
  ex.digest = script_digest(role, template_id, request.prompt);
  ex.prompt = std::move(request.prompt);
  ex.response = std::move(completion.text);
  ex.usage = completion.usage;
  return ex;
}

}  // namespace coreagent::llm
