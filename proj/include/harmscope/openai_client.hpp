#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>

#include <nlohmann/json.hpp>

#include "harmscope/backend.hpp"
#include "harmscope/rng.hpp"
#include "harmscope/tokenizer.hpp"

namespace harmscope {

struct Endpoint {
  std::string base_url;  // e.g. "http://localhost:8000"; "/v1/chat/completions" is appended
  std::string api_key;   // sent as a bearer token when non-empty
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  std::chrono::milliseconds max_delay{60000};
  bool jitter = true;

  /// Delay before retry number `retry` (1-based), before jitter.
  std::chrono::milliseconds backoff(int retry) const;
};

struct ClientOptions {
  int max_inflight = 4;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};
};

/// Environment variable holding endpoint credentials.
inline constexpr const char* kApiKeyEnv = "HARMSCOPE_API_KEY";

/// First non-empty of: HARMSCOPE_API_KEY, OPENAI_API_KEY, the key file's
/// first line. Empty when none is set.
std::string resolve_api_key(const std::optional<std::filesystem::path>& key_file = std::nullopt);

/// Chat-completion body: one user message carrying the whole prompt.
nlohmann::json build_chat_body(const CompletionRequest& request);

/// Client for OpenAI-compatible POST <base>/v1/chat/completions endpoints.
///
/// Retries timeouts, connection errors, 429 and 5xx with exponential backoff;
/// auth and other 4xx errors fail immediately. Safe to share across threads;
/// at most max_inflight requests are on the wire at once.
class OpenAiClient final : public Backend {
 public:
  OpenAiClient(Endpoint endpoint, std::shared_ptr<const TokenCounter> counter, ClientOptions options = {});
  ~OpenAiClient() override;

  /// Throws ContextWindowError before any network call when the counted
  /// prompt tokens plus max_tokens exceed the context window.
  CompletionResponse complete(const CompletionRequest& request);

  CompletionResponse run(const DetectionTask& task) override { return complete(task.request); }
  std::string name() const override { return "openai:" + endpoint_.base_url; }

  /// HTTP attempts issued so far, retries included.
  int attempts_made() const { return attempts_.load(); }

 private:
  struct Url {
    std::string scheme_host_port;
    std::string path_prefix;
  };
  static Url split_url(const std::string& base);
  std::chrono::milliseconds jittered(std::chrono::milliseconds delay);

  Endpoint endpoint_;
  Url url_;
  std::shared_ptr<const TokenCounter> counter_;
  ClientOptions options_;
  std::counting_semaphore<> inflight_;
  std::atomic<int> attempts_{0};
  std::mutex jitter_mutex_;
  Rng jitter_rng_;
};

}  // namespace harmscope
