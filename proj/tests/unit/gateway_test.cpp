// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

#include "coreagent/digest.hpp"
#include "coreagent/error.hpp"
#include "coreagent/gateway.hpp"
#include "test_util.hpp"

namespace {

using namespace coreagent;
using namespace coreagent::llm;
using testkit::TempDir;

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(base64_encode("08:00"), "MDg6MDA=");
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_decode("MDg6MDA="), "08:00");
  const std::string binary("\x00\xff\x10 z", 5);
  EXPECT_EQ(base64_decode(base64_encode(binary)), binary);
}

TEST(ScriptDigest, CanonicalisesWhitespace) {
  EXPECT_EQ(canonicalize_prompt("a  \r\nb\t\n\n"), "a\nb");
  EXPECT_EQ(script_digest(Role::Cloud, TemplateId::CloudDecide, "x \ny"),
            script_digest(Role::Cloud, TemplateId::CloudDecide, "x\r\ny\n"));
  EXPECT_NE(script_digest(Role::Cloud, TemplateId::CloudDecide, "x"),
            script_digest(Role::Local, TemplateId::CloudDecide, "x"));
  EXPECT_NE(script_digest(Role::Cloud, TemplateId::CloudDecide, "x"),
            script_digest(Role::Cloud, TemplateId::CloudBaseline, "x"));
  EXPECT_EQ(script_digest(Role::Local, TemplateId::LocalRank, "p"), sha256_hex("local\nLocalRank\np"));
}

TEST(ScriptDigest, TokenEstimate) {
  EXPECT_EQ(estimate_tokens(""), 0);
  EXPECT_EQ(estimate_tokens("abcd"), 1);
  EXPECT_EQ(estimate_tokens("abcde"), 2);
}

TEST(ScriptedBackend, ServesByDigestAndMisses) {
  ScriptedBackend b;
  b.add({script_digest(Role::Local, TemplateId::LocalSubtask, "hello"), Role::Local, "LocalSubtask", "world", ""});
  const auto c = b.complete({Role::Local, TemplateId::LocalSubtask, "hello  \n"});
  EXPECT_EQ(c.text, "world");
  EXPECT_EQ(c.usage.prompt_tokens, estimate_tokens("hello  \n"));
  EXPECT_EQ(c.usage.completion_tokens, estimate_tokens("world"));
  EXPECT_EQ(c.usage.wall_seconds, 0.0);
  try {
    b.complete({Role::Cloud, TemplateId::LocalSubtask, "hello"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ScriptMiss);
  }

  ScriptedBackend lenient(true);
  EXPECT_EQ(lenient.complete({Role::Cloud, TemplateId::CloudConfirm, "p"}).text, "");
  ASSERT_EQ(lenient.misses().size(), 1u);
  EXPECT_EQ(lenient.misses()[0].template_name, "CloudConfirm");
  EXPECT_EQ(lenient.misses()[0].prompt, "p");
}

TEST(ScriptedBackend, ConflictingRecordsRejected) {
  ScriptedBackend b;
  b.add({"d", Role::Local, "LocalSubtask", "one", ""});
  EXPECT_NO_THROW(b.add({"d", Role::Local, "LocalSubtask", "one", ""}));
  EXPECT_THROW(b.add({"d", Role::Local, "LocalSubtask", "two", ""}), Error);
  EXPECT_EQ(b.size(), 1u);
}

TEST(ScriptManifest, RoundTripAndVerification) {
  TempDir dir("manifest");
  std::vector<ScriptRecord> recs{
      {script_digest(Role::Cloud, TemplateId::CloudConfirm, "q2"), Role::Cloud, "CloudConfirm", "FINISHED", "q2"},
      {script_digest(Role::Local, TemplateId::LocalRank, "q1"), Role::Local, "LocalRank", "{}", "q1"},
  };
  write_manifest(dir / "m.json", recs);
  const auto back = read_manifest(dir / "m.json");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_LT(back[0].digest, back[1].digest);
  const auto loaded = ScriptedBackend::load(dir.path());
  EXPECT_EQ(loaded->complete({Role::Cloud, TemplateId::CloudConfirm, "q2"}).text, "FINISHED");

  auto doc = nlohmann::json::parse(testkit::read_file(dir / "m.json"));
  doc["records"][0]["prompt"] = "tampered";
  testkit::write_file(dir / "bad.json", doc.dump());
  EXPECT_THROW(read_manifest(dir / "bad.json"), Error);
  testkit::write_file(dir / "worse.json", "{\"records\": 3}");
  EXPECT_THROW(read_manifest(dir / "worse.json"), Error);
  EXPECT_THROW(ScriptedBackend::load(dir / "missing"), Error);
}

TEST(RecordingBackend, RecordsReplayableScripts) {
  auto inner = std::make_shared<FunctionBackend>([](const CompletionRequest& r) { return "echo:" + r.prompt; });
  auto rec = std::make_shared<RecordingBackend>(inner);
  Gateway gw(rec, rec);
  EXPECT_EQ(gw.complete(Role::Local, TemplateId::LocalSubtask, "a").response, "echo:a");
  EXPECT_EQ(gw.complete(Role::Cloud, TemplateId::CloudDecide, "b").response, "echo:b");
  gw.complete(Role::Cloud, TemplateId::CloudDecide, "b");
  const auto records = rec->records();
  ASSERT_EQ(records.size(), 2u);

  ScriptedBackend replay;
  for (const auto& r : records) replay.add(r);
  EXPECT_EQ(replay.complete({Role::Cloud, TemplateId::CloudDecide, "b"}).text, "echo:b");
}

TEST(Gateway, ExchangeCarriesDigestAndUsage) {
  auto fb = std::make_shared<FunctionBackend>([](const CompletionRequest&) { return std::string("ok!!"); });
  Gateway gw(fb, nullptr);
  const auto ex = gw.complete(Role::Local, TemplateId::LocalRank, "prompt");
  EXPECT_EQ(ex.digest, script_digest(Role::Local, TemplateId::LocalRank, "prompt"));
  EXPECT_EQ(ex.prompt, "prompt");
  EXPECT_EQ(ex.usage.completion_tokens, 1);
  EXPECT_TRUE(ex.error.empty());
  EXPECT_FALSE(gw.has_backend(Role::Cloud));
  try {
    gw.complete(Role::Cloud, TemplateId::CloudDecide, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BackendFailure);
  }
}

TEST(Gateway, ConcurrencyIsCapped) {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  auto fb = std::make_shared<FunctionBackend>([&](const CompletionRequest&) {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight;
    return std::string("x");
  });
  Gateway gw(fb, fb, 2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&gw] { gw.complete(Role::Local, TemplateId::LocalSubtask, "p"); });
  }
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(Gateway, BackendExceptionsPropagateAndReleaseSlot) {
  auto fb = std::make_shared<FunctionBackend>(
      [](const CompletionRequest&) -> std::string { throw Error(ErrorKind::Transport, "down"); });
  Gateway gw(fb, fb, 1);
  for (int i = 0; i < 3; ++i) EXPECT_THROW(gw.complete(Role::Local, TemplateId::LocalSubtask, "p"), Error);
}

TEST(GatewayConfig, LoadsFileAndSkipsUnconfiguredRoles) {
  TempDir dir("cfg");
  std::vector<ScriptRecord> recs{
      {script_digest(Role::Cloud, TemplateId::CloudConfirm, "q"), Role::Cloud, "CloudConfirm", "A", "q"}};
  write_manifest(dir / "s.json", recs);
  testkit::write_file(dir / "cfg.json", "{\"cloud\": {\"kind\": \"scripted\", \"script_path\": \"" +
                                            (dir / "s.json").string() + "\"}, \"max_concurrency\": 2}");
  const auto cfg = load_gateway_config(dir / "cfg.json");
  EXPECT_EQ(cfg.max_concurrency, 2);
  EXPECT_TRUE(cfg.cloud.configured());
  EXPECT_FALSE(cfg.local.configured());
  const auto gw = Gateway::from_config(cfg);
  EXPECT_TRUE(gw.has_backend(Role::Cloud));
  EXPECT_FALSE(gw.has_backend(Role::Local));
  EXPECT_EQ(gw.complete(Role::Cloud, TemplateId::CloudConfirm, "q").response, "A");

  testkit::write_file(dir / "bad.json", "{\"local\": {\"kind\": \"telepathy\"}}");
  EXPECT_THROW(load_gateway_config(dir / "bad.json"), Error);
  EXPECT_THROW(load_gateway_config(dir / "absent.json"), Error);
}

TEST(GatewayConfig, Validation) {
  BackendConfig http;
  http.kind = BackendKind::HttpChat;
  EXPECT_THROW(http.validate(), Error);
  http.endpoint = "http://localhost:1";
  EXPECT_THROW(http.validate(), Error);
  http.model_name = "m";
  EXPECT_NO_THROW(http.validate());
  http.timeout_ms = 0;
  EXPECT_THROW(http.validate(), Error);
  BackendConfig scripted;
  EXPECT_FALSE(scripted.configured());
  EXPECT_THROW(scripted.validate(), Error);
}

TEST(GatewayConfig, EnvironmentOverrides) {
  ::setenv("CORE_CLOUD_ENDPOINT", "http://127.0.0.1:9/v1", 1);
  ::setenv("CORE_CLOUD_MODEL", "big", 1);
  ::setenv("CORE_CLOUD_KEY", "env:SOME_KEY", 1);
  GatewayConfig cfg;
  apply_env_overrides(cfg);
  ::unsetenv("CORE_CLOUD_ENDPOINT");
  ::unsetenv("CORE_CLOUD_MODEL");
  ::unsetenv("CORE_CLOUD_KEY");
  EXPECT_EQ(cfg.cloud.kind, BackendKind::HttpChat);
  EXPECT_EQ(cfg.cloud.endpoint, "http://127.0.0.1:9/v1");
  EXPECT_EQ(cfg.cloud.model_name, "big");
  EXPECT_EQ(cfg.cloud.auth, "env:SOME_KEY");
  EXPECT_FALSE(cfg.local.configured());
}

// Local OpenAI-compatible stub. Each request pops the next scripted status.
class StubServer {
 public:
  explicit StubServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = calls_++;
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      const int status = n < static_cast<int>(statuses_.size()) ? statuses_[static_cast<std::size_t>(n)] : 200;
      res.status = status;
      if (status == 200) {
        nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "pong"}}}}}},
                             {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}};
        res.set_content(reply.dump(), "application/json");
      } else {
        res.set_content("{\"error\": \"nope\"}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  [[nodiscard]] std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  [[nodiscard]] int calls() const { return calls_.load(); }
  [[nodiscard]] std::string last_auth() const { return last_auth_; }
  [[nodiscard]] std::string last_body() const { return last_body_; }

 private:
  httplib::Server server_;
  std::vector<int> statuses_;
  std::atomic<int> calls_{0};
  std::string last_auth_;
  std::string last_body_;
  int port_ = 0;
  std::thread thread_;
};

BackendConfig http_config(const std::string& endpoint) {
  BackendConfig c;
  c.kind = BackendKind::HttpChat;
  c.role = Role::Cloud;
  c.endpoint = endpoint;
  c.model_name = "stub-model";
  c.auth = "secret";
  c.max_retries = 2;
  c.backoff_ms = 1;
  c.timeout_ms = 2000;
  return c;
}

TEST(HttpChatBackend, SuccessReportsServerUsage) {
  StubServer server({200});
  HttpChatBackend backend(http_config(server.endpoint()));
  const auto c = backend.complete({Role::Cloud, TemplateId::CloudDecide, "ping"});
  EXPECT_EQ(c.text, "pong");
  EXPECT_EQ(c.usage.prompt_tokens, 11);
  EXPECT_EQ(c.usage.completion_tokens, 3);
  EXPECT_GE(c.usage.wall_seconds, 0.0);
  EXPECT_EQ(server.last_auth(), "Bearer secret");
  const auto body = nlohmann::json::parse(server.last_body());
  EXPECT_EQ(body["model"], "stub-model");
  EXPECT_EQ(body["messages"][0]["content"], "ping");
  EXPECT_EQ(body["temperature"], 0.0);
}

TEST(HttpChatBackend, RetriesServerErrors) {
  StubServer server({500, 429, 200});
  HttpChatBackend backend(http_config(server.endpoint()));
  EXPECT_EQ(backend.complete({Role::Cloud, TemplateId::CloudDecide, "ping"}).text, "pong");
  EXPECT_EQ(server.calls(), 3);
}

TEST(HttpChatBackend, GivesUpAfterRetries) {
  StubServer server({503, 503, 503, 503});
  HttpChatBackend backend(http_config(server.endpoint()));
  try {
    backend.complete({Role::Cloud, TemplateId::CloudDecide, "ping"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Transport);
  }
  EXPECT_EQ(server.calls(), 3);
}

TEST(HttpChatBackend, AuthFailureIsNotRetried) {
  StubServer server({401});
  HttpChatBackend backend(http_config(server.endpoint()));
  try {
    backend.complete({Role::Cloud, TemplateId::CloudDecide, "ping"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AuthFailure);
  }
  EXPECT_EQ(server.calls(), 1);
}

TEST(HttpChatBackend, ClientErrorIsBackendFailure) {
  StubServer server({400});
  HttpChatBackend backend(http_config(server.endpoint()));
  try {
    backend.complete({Role::Cloud, TemplateId::CloudDecide, "ping"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BackendFailure);
  }
}

TEST(HttpChatBackend, KeyFromEnvironment) {
  StubServer server({200});
  ::setenv("COREAGENT_TEST_KEY", "from-env", 1);
  auto cfg = http_config(server.endpoint() + "/chat/completions");
  cfg.auth = "env:COREAGENT_TEST_KEY";
  HttpChatBackend backend(cfg);
  ::unsetenv("COREAGENT_TEST_KEY");
  backend.complete({Role::Cloud, TemplateId::CloudDecide, "ping"});
  EXPECT_EQ(server.last_auth(), "Bearer from-env");
}

TEST(HttpChatBackend, UnreachableIsTransport) {
  auto cfg = http_config("http://127.0.0.1:1/v1");
  cfg.max_retries = 0;
  HttpChatBackend backend(cfg);
  try {
    backend.complete({Role::Cloud, TemplateId::CloudDecide, "ping"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::Transport || e.kind() == ErrorKind::Timeout) << e.what();
  }
}

}  // namespace
