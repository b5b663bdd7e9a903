#pragma once

#include <string_view>

namespace harmscope {

/// Counts tokens for budget filling and context-window checks.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual int count(std::string_view text) const = 0;
};

/// Whitespace-piece approximation: ceil(pieces * multiplier), at least 1 for
/// non-blank text. A multiplier of 1.0 counts whitespace-delimited words.
class WhitespaceTokenCounter final : public TokenCounter {
 public:
  static constexpr double kDefaultMultiplier = 1.3;

  explicit WhitespaceTokenCounter(double multiplier = kDefaultMultiplier);

  int count(std::string_view text) const override;
  double multiplier() const { return multiplier_; }

 private:
  double multiplier_;
};

int count_whitespace_pieces(std::string_view text);

}  // namespace harmscope
