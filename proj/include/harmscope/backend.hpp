#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "harmscope/corpus.hpp"
#include "harmscope/synthesis.hpp"

namespace harmscope {

struct CompletionRequest {
  std::string model;
  std::string prompt;  // sent as the single user message
  double temperature = 0.0;
  double top_p = 1.0;
  int top_k = 0;  // 0 disables top-k
  int max_tokens = 16;
  int context_window = 8192;
};

struct TransportStatus {
  enum class Kind { kOk, kRetried, kFailed };

  Kind kind = Kind::kOk;
  int retries = 0;
  std::string reason;

  static TransportStatus ok() { return {}; }
  static TransportStatus retried(int n) { return {Kind::kRetried, n, {}}; }
  static TransportStatus failed(std::string why, int n = 0) { return {Kind::kFailed, n, std::move(why)}; }

  bool succeeded() const { return kind != Kind::kFailed; }
  std::string describe() const;
};

struct CompletionResponse {
  std::optional<std::string> text;  // present iff the transport succeeded
  std::int64_t latency_ms = 0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  TransportStatus status;
};

/// Raised before any network traffic when prompt + completion cannot fit.
class ContextWindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What a detector is asked to judge. Mocks read the ground truth carried
/// here; network backends only see request.prompt.
struct DetectionTask {
  CompletionRequest request;
  const ConstructedPrompt* prompt = nullptr;    // long-context tasks
  const LabeledSentence* sentence = nullptr;    // sentence-level tasks
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResponse run(const DetectionTask& task) = 0;
  virtual std::string name() const = 0;
};

inline constexpr int kMaxTokensPerIndex = 8;
inline constexpr int kMaxTokensFloor = 16;

/// min(context_window - prompt_tokens, 8 * expected_harmful_count + 16).
/// Throws ContextWindowError when prompt_tokens >= context_window.
int dynamic_max_tokens(int expected_harmful_count, int context_window, int prompt_tokens);

}  // namespace harmscope
