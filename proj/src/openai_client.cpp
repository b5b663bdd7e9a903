#include "harmscope/openai_client.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>

namespace harmscope {

using nlohmann::json;

std::chrono::milliseconds RetryPolicy::backoff(int retry) const {
  auto delay = base_delay;
  for (int i = 1; i < retry && delay < max_delay; ++i) delay *= 2;
  return std::min(delay, max_delay);
}

std::string resolve_api_key(const std::optional<std::filesystem::path>& key_file) {
  for (const char* var : {kApiKeyEnv, "OPENAI_API_KEY"}) {
    if (const char* value = std::getenv(var); value != nullptr && *value != '\0') return value;
  }
  if (key_file) {
    std::ifstream in(*key_file);
    std::string line;
    if (in && std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) return {};
      return line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
    }
  }
  return {};
}

json build_chat_body(const CompletionRequest& request) {
  json body = {
      {"model", request.model},
      {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"top_p", request.top_p},
      {"max_tokens", request.max_tokens},
  };
  if (request.top_k > 0) body["top_k"] = request.top_k;
  return body;
}

OpenAiClient::Url OpenAiClient::split_url(const std::string& base) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch match;
  if (!std::regex_match(base, match, kUrl)) {
    throw std::invalid_argument("endpoint must look like http(s)://host[:port][/prefix], got '" + base + "'");
  }
  Url url{match[1].str(), match[2].matched ? match[2].str() : std::string{}};
  while (!url.path_prefix.empty() && url.path_prefix.back() == '/') url.path_prefix.pop_back();
  return url;
}

OpenAiClient::OpenAiClient(Endpoint endpoint, std::shared_ptr<const TokenCounter> counter, ClientOptions options)
    : endpoint_(std::move(endpoint)),
      url_(split_url(endpoint_.base_url)),
      counter_(std::move(counter)),
      options_(options),
      inflight_(std::max(1, options.max_inflight)),
      jitter_rng_(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count())) {
  if (!counter_) throw std::invalid_argument("OpenAiClient needs a token counter");
  if (options_.retry.max_attempts < 1) throw std::invalid_argument("retry policy needs at least one attempt");
}

OpenAiClient::~OpenAiClient() = default;

std::chrono::milliseconds OpenAiClient::jittered(std::chrono::milliseconds delay) {
  if (!options_.retry.jitter) return delay;
  std::lock_guard lock(jitter_mutex_);
  const double factor = 0.5 + 0.5 * jitter_rng_.uniform();
  return std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(delay.count()) * factor));
}

namespace {

bool is_transient(int status) { return status == 429 || status >= 500; }

}  // namespace

CompletionResponse OpenAiClient::complete(const CompletionRequest& request) {
  const int prompt_tokens = counter_->count(request.prompt);
  if (prompt_tokens + request.max_tokens > request.context_window) {
    throw ContextWindowError("prompt (" + std::to_string(prompt_tokens) + " tokens) + max_tokens (" +
                             std::to_string(request.max_tokens) + ") exceeds the context window of " +
                             std::to_string(request.context_window));
  }

  const auto body = build_chat_body(request).dump();
  const auto path = url_.path_prefix + "/v1/chat/completions";
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

  CompletionResponse response;
  response.prompt_tokens = prompt_tokens;
  const auto started = std::chrono::steady_clock::now();
  const auto finish = [&](TransportStatus status) {
    response.status = std::move(status);
    response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - started)
                              .count();
    return response;
  };

  std::string last_error;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(jittered(options_.retry.backoff(attempt - 1)));

    httplib::Result result;
    {
      inflight_.acquire();
      httplib::Client client(url_.scheme_host_port);
      client.set_connection_timeout(options_.timeout);
      client.set_read_timeout(options_.timeout);
      client.set_write_timeout(options_.timeout);
      ++attempts_;
      result = client.Post(path, headers, body, "application/json");
      inflight_.release();
    }
    const int retries = attempt - 1;

    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 401 || status == 403) {
      return finish(TransportStatus::failed("auth failure (HTTP " + std::to_string(status) + ")", retries));
    }
    if (is_transient(status)) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status != 200) {
      return finish(TransportStatus::failed("HTTP " + std::to_string(status), retries));
    }

    try {
      const auto parsed = json::parse(result->body);
      const auto& content = parsed.at("choices").at(0).at("message").at("content");
      response.text = content.is_null() ? std::string{} : content.get<std::string>();
      if (parsed.contains("usage") && parsed["usage"].is_object()) {
        const auto& usage = parsed["usage"];
        response.prompt_tokens = usage.value("prompt_tokens", prompt_tokens);
        response.completion_tokens = usage.value("completion_tokens", 0);
      }
    } catch (const json::exception& e) {
      response.text.reset();
      return finish(TransportStatus::failed(std::string("malformed response: ") + e.what(), retries));
    }
    return finish(retries == 0 ? TransportStatus::ok() : TransportStatus::retried(retries));
  }
  return finish(TransportStatus::failed("retry exhaustion after " + std::to_string(options_.retry.max_attempts) +
                                            " attempts (last: " + last_error + ")",
                                        options_.retry.max_attempts - 1));
}

}  // namespace harmscope
