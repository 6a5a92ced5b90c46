#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "heurevo/error.hpp"
#include "heurevo/llm.hpp"

namespace heurevo {
namespace {

using json = nlohmann::json;

TEST(Scripted, MatchesInOrderAndConsumes) {
  ScriptedProvider p({{"crossover", "A", 1}, {"", "fallback", -1}, {"crossover", "B", 1}});
  EXPECT_EQ(p.complete({"s", "do crossover"}), "A");
  EXPECT_EQ(p.complete({"s", "do crossover"}), "fallback");
  EXPECT_EQ(p.complete({"s", "anything"}), "fallback");
  EXPECT_EQ(p.calls().size(), 3u);
  EXPECT_EQ(p.telemetry().size(), 3u);
}

TEST(Scripted, ExhaustionIsProviderError) {
  ScriptedProvider p({{"", "only", 2}});
  EXPECT_EQ(p.remaining(), 1u);
  p.complete({"", "x"});
  p.complete({"", "x"});
  EXPECT_EQ(p.remaining(), 0u);
  try {
    p.complete({"", "third prompt"});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.retryable());
    EXPECT_NE(std::string(e.what()).find("third prompt"), std::string::npos);
  }
}

TEST(Scripted, JsonForms) {
  auto a = ScriptedProvider::from_json_text(R"([{"match": "m", "reply": "r"}])");
  EXPECT_EQ(a->complete({"", "mm"}), "r");
  auto b = ScriptedProvider::from_json_text(R"({"entries": [{"reply": "z", "times": -1}]})");
  for (int i = 0; i < 5; ++i) EXPECT_EQ(b->complete({"", "q"}), "z");
  EXPECT_THROW(ScriptedProvider::from_json_text("{bad"), Error);
  EXPECT_THROW(ScriptedProvider::from_json_text(R"([{"match": "m"}])"), Error);
}

TEST(Scripted, FromFileAndFactory) {
  const auto path = std::filesystem::temp_directory_path() / "heurevo_script_test.json";
  std::ofstream(path) << R"([{"match": "", "reply": "ok", "times": -1}])";
  ProviderConfig cfg;
  cfg.kind = ProviderKind::kScripted;
  cfg.script_path = path;
  auto p = make_provider(cfg);
  EXPECT_EQ(p->complete({"", "x"}), "ok");
  std::filesystem::remove(path);
  cfg.script_path.clear();
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Config, HttpRequiresEndpoint) {
  ProviderConfig cfg;
  cfg.kind = ProviderKind::kHttpChat;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.endpoint = "http://127.0.0.1:1/v1";
  EXPECT_NO_THROW(cfg.validate());
  cfg.concurrency_limit = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

// Local chat-completions stub.
class Stub {
 public:
  explicit Stub(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~Stub() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string reply_body(const std::string& content) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
              {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 7}}}}
      .dump();
}

ProviderConfig http_config(const Stub& stub) {
  ::setenv("HEUREVO_TEST_KEY", "secret-token", 1);
  ProviderConfig cfg;
  cfg.kind = ProviderKind::kHttpChat;
  cfg.endpoint = stub.endpoint();
  cfg.api_key_env = "HEUREVO_TEST_KEY";
  cfg.model_name = "test-model";
  cfg.backoff_initial_seconds = 0.01;
  cfg.backoff_max_seconds = 0.02;
  cfg.request_timeout_seconds = 5.0;
  return cfg;
}

TEST(Http, SendsChatRequestAndParsesReply) {
  json seen;
  std::string auth;
  Stub stub([&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(reply_body("hello"), "application/json");
  });
  HttpChatProvider p(http_config(stub));
  EXPECT_EQ(p.complete({"sys", "usr", 0.5, 100}), "hello");
  EXPECT_EQ(auth, "Bearer secret-token");
  EXPECT_EQ(seen["model"], "test-model");
  EXPECT_EQ(seen["messages"][0]["role"], "system");
  EXPECT_EQ(seen["messages"][1]["content"], "usr");
  EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 0.5);
  ASSERT_EQ(p.telemetry().size(), 1u);
  EXPECT_EQ(p.telemetry()[0].prompt_tokens, 11);
  EXPECT_EQ(p.telemetry()[0].completion_tokens, 7);
  EXPECT_EQ(p.telemetry()[0].attempts, 1);
}

TEST(Http, RetriesTransientFailures) {
  std::atomic<int> hits{0};
  Stub stub([&](const httplib::Request&, httplib::Response& res) {
    if (++hits == 1) {
      res.status = 503;
      return;
    }
    res.set_content(reply_body("after retry"), "application/json");
  });
  HttpChatProvider p(http_config(stub));
  EXPECT_EQ(p.complete({"", "x"}), "after retry");
  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(p.telemetry()[0].attempts, 2);
}

TEST(Http, GivesUpAfterMaxRetries) {
  std::atomic<int> hits{0};
  Stub stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 429;
  });
  auto cfg = http_config(stub);
  cfg.max_retries = 2;
  HttpChatProvider p(cfg);
  EXPECT_THROW(p.complete({"", "x"}), ProviderError);
  EXPECT_EQ(hits.load(), 3);
}

TEST(Http, AuthFailureNotRetried) {
  std::atomic<int> hits{0};
  Stub stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  HttpChatProvider p(http_config(stub));
  try {
    p.complete({"", "x"});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_NE(std::string(e.what()).find("401"), std::string::npos);
  }
  EXPECT_EQ(hits.load(), 1);
}

TEST(Http, MalformedReplyIsProviderError) {
  Stub stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": []}", "application/json");
  });
  HttpChatProvider p(http_config(stub));
  EXPECT_THROW(p.complete({"", "x"}), ProviderError);
}

TEST(Http, MissingKeyIsReported) {
  Stub stub([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(reply_body("x"), "application/json");
  });
  auto cfg = http_config(stub);
  cfg.api_key_env = "HEUREVO_TEST_UNSET_KEY";
  ::unsetenv("HEUREVO_TEST_UNSET_KEY");
  HttpChatProvider p(cfg);
  EXPECT_THROW(p.complete({"", "x"}), ProviderError);
}

TEST(Http, ConcurrencyLimitHolds) {
  std::atomic<int> active{0}, peak{0};
  Stub stub([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(60));
    --active;
    res.set_content(reply_body("ok"), "application/json");
  });
  auto cfg = http_config(stub);
  cfg.concurrency_limit = 2;
  HttpChatProvider p(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { EXPECT_EQ(p.complete({"", "x"}), "ok"); });
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(p.limiter().peak(), 2u);
  EXPECT_EQ(p.telemetry().size(), 8u);
}

TEST(Limiter, BlocksAtLimit) {
  ConcurrencyLimiter l(1);
  l.acquire();
  std::atomic<bool> got{false};
  std::thread t([&] {
    l.acquire();
    got = true;
    l.release();
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  EXPECT_FALSE(got.load());
  l.release();
  t.join();
  EXPECT_TRUE(got.load());
  EXPECT_EQ(l.peak(), 1u);
}

}  // namespace
}  // namespace heurevo
