#include "harmscope/backend.hpp"

#include <algorithm>

namespace harmscope {

std::string TransportStatus::describe() const {
  switch (kind) {
    case Kind::kOk: return "ok";
    case Kind::kRetried: return "retried(" + std::to_string(retries) + ")";
    case Kind::kFailed: return "failed(" + reason + ")";
  }
  return "failed";
}

int dynamic_max_tokens(int expected_harmful_count, int context_window, int prompt_tokens) {
  if (prompt_tokens >= context_window) {
    throw ContextWindowError("prompt uses " + std::to_string(prompt_tokens) + " tokens of a " +
                             std::to_string(context_window) + "-token context window");
  }
  const int wanted = kMaxTokensPerIndex * std::max(0, expected_harmful_count) + kMaxTokensFloor;
  return std::min(context_window - prompt_tokens, wanted);
}

}  // namespace harmscope
