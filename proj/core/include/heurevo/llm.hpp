#pragma once

#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace heurevo {

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 1.0;
  int max_tokens = 4096;
};

enum class ProviderKind { kHttpChat, kScripted };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kScripted;
  std::string endpoint;  ///< base URL; requests go to {endpoint}/chat/completions
  std::string model_name = "gemini-2.0-flash";
  std::string api_key_env = "LLM_API_KEY";
  double request_timeout_seconds = 120.0;
  int max_retries = 3;
  std::size_t concurrency_limit = 4;
  double backoff_initial_seconds = 1.0;
  double backoff_max_seconds = 30.0;
  std::filesystem::path script_path;  ///< scripted provider source

  /// Throws ValidationError when required fields for `kind` are missing.
  void validate() const;
};

struct CallTelemetry {
  double latency_ms = 0.0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  int attempts = 0;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  /// Returns the assistant text. Throws ProviderError.
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::vector<CallTelemetry> telemetry() const = 0;
};

/// Counting semaphore with a runtime limit.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(std::size_t limit);

  void acquire();
  void release();
  std::size_t in_flight() const;
  std::size_t peak() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
};

struct ScriptEntry {
  std::string matcher;  ///< substring of the user prompt; empty matches everything
  std::string reply;
  int times = 1;        ///< uses before the entry is consumed; -1 = unlimited
};

/// Deterministic replay provider. Each call takes the first entry whose
/// matcher occurs in the user prompt.
class ScriptedProvider final : public LlmProvider {
 public:
  explicit ScriptedProvider(std::vector<ScriptEntry> script);

  /// JSON: `[{"match": ..., "reply": ..., "times": n}, ...]` or `{"entries": [...]}`.
  static std::unique_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);
  static std::unique_ptr<ScriptedProvider> from_json_text(const std::string& text);

  std::string complete(const ChatRequest& request) override;
  std::vector<CallTelemetry> telemetry() const override;

  /// User prompts seen so far, in call order.
  std::vector<std::string> calls() const;
  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  std::vector<ScriptEntry> script_;
  std::vector<std::string> calls_;
  std::vector<CallTelemetry> telemetry_;
};

/// OpenAI-compatible chat-completions client.
class HttpChatProvider final : public LlmProvider {
 public:
  explicit HttpChatProvider(ProviderConfig config);

  std::string complete(const ChatRequest& request) override;
  std::vector<CallTelemetry> telemetry() const override;
  const ConcurrencyLimiter& limiter() const noexcept { return limiter_; }

 private:
  std::string attempt(const std::string& body, const std::string& api_key, CallTelemetry& tel);

  ProviderConfig config_;
  std::string origin_;  ///< scheme://host[:port]
  std::string path_;    ///< {base path}/chat/completions
  ConcurrencyLimiter limiter_;
  mutable std::mutex telemetry_mu_;
  std::vector<CallTelemetry> telemetry_;
};

std::unique_ptr<LlmProvider> make_provider(const ProviderConfig& config);

}  // namespace heurevo
