#include "heurevo/llm.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#ifdef HEUREVO_HAS_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "heurevo/error.hpp"

namespace heurevo {

using json = nlohmann::json;

void ProviderConfig::validate() const {
  if (kind == ProviderKind::kHttpChat) {
    if (endpoint.empty()) throw ValidationError("http_chat provider requires an endpoint");
    if (api_key_env.empty()) throw ValidationError("http_chat provider requires api_key_env");
  } else if (script_path.empty()) {
    throw ValidationError("scripted provider requires a script file");
  }
  if (concurrency_limit == 0) throw ValidationError("concurrency_limit must be at least 1");
  if (max_retries < 0) throw ValidationError("max_retries must be non-negative");
}

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t limit) : limit_(std::max<std::size_t>(limit, 1)) {}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::size_t ConcurrencyLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

std::size_t ConcurrencyLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

// --- scripted -------------------------------------------------------------

ScriptedProvider::ScriptedProvider(std::vector<ScriptEntry> script) : script_(std::move(script)) {
  if (script_.empty()) throw ValidationError("scripted provider needs a non-empty script");
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid provider script: ") + e.what());
  }
  const json& list = doc.is_object() && doc.contains("entries") ? doc["entries"] : doc;
  if (!list.is_array()) throw ValidationError("provider script must be a JSON array of entries");
  std::vector<ScriptEntry> script;
  for (const auto& e : list) {
    ScriptEntry entry;
    try {
      entry.matcher = e.value("match", std::string());
      entry.reply = e.at("reply").get<std::string>();
      entry.times = e.value("times", 1);
    } catch (const json::exception& ex) {
      throw ValidationError("script entry " + std::to_string(script.size()) + ": " + ex.what());
    }
    if (entry.times == 0 || entry.times < -1) {
      throw ValidationError("script entry 'times' must be positive or -1");
    }
    script.push_back(std::move(entry));
  }
  return std::make_unique<ScriptedProvider>(std::move(script));
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open provider script " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string ScriptedProvider::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  calls_.push_back(request.user);
  for (auto it = script_.begin(); it != script_.end(); ++it) {
    if (request.user.find(it->matcher) == std::string::npos) continue;
    std::string reply = it->reply;
    if (it->times > 0 && --it->times == 0) script_.erase(it);
    telemetry_.push_back({0.0, 0, 0, 1});
    return reply;
  }
  std::string prefix = request.user.substr(0, 80);
  std::replace(prefix.begin(), prefix.end(), '\n', ' ');
  throw ProviderError("scripted provider: no entry matches prompt '" + prefix + "...'");
}

std::vector<CallTelemetry> ScriptedProvider::telemetry() const {
  std::lock_guard lock(mu_);
  return telemetry_;
}

std::vector<std::string> ScriptedProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mu_);
  return script_.size();
}

// --- http -----------------------------------------------------------------

namespace {

/// Splits "https://host:port/v1/" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) throw ValidationError("endpoint must include a scheme: " + endpoint);
  const std::size_t path = endpoint.find('/', scheme + 3);
  std::string origin = endpoint.substr(0, path);
  std::string base = path == std::string::npos ? "" : endpoint.substr(path);
  while (!base.empty() && base.back() == '/') base.pop_back();
  return {origin, base};
}

class LimiterGuard {
 public:
  explicit LimiterGuard(ConcurrencyLimiter& l) : l_(l) { l_.acquire(); }
  ~LimiterGuard() { l_.release(); }
  LimiterGuard(const LimiterGuard&) = delete;
  LimiterGuard& operator=(const LimiterGuard&) = delete;

 private:
  ConcurrencyLimiter& l_;
};

}  // namespace

HttpChatProvider::HttpChatProvider(ProviderConfig config)
    : config_(std::move(config)), limiter_(config_.concurrency_limit) {
  if (config_.kind != ProviderKind::kHttpChat) config_.kind = ProviderKind::kHttpChat;
  config_.validate();
  auto [origin, base] = split_endpoint(config_.endpoint);
#ifndef HEUREVO_HAS_OPENSSL
  if (origin.rfind("https://", 0) == 0) {
    throw ValidationError("https endpoints need a build with OpenSSL support");
  }
#endif
  origin_ = std::move(origin);
  path_ = base + "/chat/completions";
}

std::string HttpChatProvider::attempt(const std::string& body, const std::string& api_key,
                                      CallTelemetry& tel) {
  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(config_.request_timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.request_timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    throw ProviderError("network error: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 401 || res->status == 403) {
    throw ProviderError("authentication failed (HTTP " + std::to_string(res->status) + ")", false);
  }
  if (res->status == 429 || res->status >= 500) {
    throw ProviderError("transient HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                        false);
  }
  try {
    const json reply = json::parse(res->body);
    if (reply.contains("usage") && reply["usage"].is_object()) {
      tel.prompt_tokens = reply["usage"].value("prompt_tokens", 0LL);
      tel.completion_tokens = reply["usage"].value("completion_tokens", 0LL);
    }
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed chat-completions reply: ") + e.what(), false);
  }
}

std::string HttpChatProvider::complete(const ChatRequest& request) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr) {
    throw ProviderError("environment variable " + config_.api_key_env + " is not set", false);
  }
  json body = {{"model", config_.model_name},
               {"messages", json::array({{{"role", "system"}, {"content", request.system}},
                                         {{"role", "user"}, {"content", request.user}}})},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  const std::string payload = body.dump();

  LimiterGuard guard(limiter_);
  CallTelemetry tel;
  const auto start = std::chrono::steady_clock::now();
  double backoff = config_.backoff_initial_seconds;
  for (int attempt_no = 0;; ++attempt_no) {
    tel.attempts = attempt_no + 1;
    try {
      std::string text = attempt(payload, key, tel);
      tel.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start).count();
      std::lock_guard lock(telemetry_mu_);
      telemetry_.push_back(tel);
      return text;
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt_no >= config_.max_retries) {
        throw ProviderError(std::string(e.what()) + " after " + std::to_string(tel.attempts) +
                                " attempt(s)",
                            false);
      }
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    backoff = std::min(backoff * 2.0, config_.backoff_max_seconds);
  }
}

std::vector<CallTelemetry> HttpChatProvider::telemetry() const {
  std::lock_guard lock(telemetry_mu_);
  return telemetry_;
}

std::unique_ptr<LlmProvider> make_provider(const ProviderConfig& config) {
  config.validate();
  if (config.kind == ProviderKind::kScripted) return ScriptedProvider::from_file(config.script_path);
  return std::make_unique<HttpChatProvider>(config);
}

}  // namespace heurevo
