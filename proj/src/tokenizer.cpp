#include "harmscope/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace harmscope {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

int count_whitespace_pieces(std::string_view text) {
  int pieces = 0;
  bool in_piece = false;
  for (char c : text) {
    if (is_space(c)) {
      in_piece = false;
    } else if (!in_piece) {
      in_piece = true;
      ++pieces;
    }
  }
  return pieces;
}

WhitespaceTokenCounter::WhitespaceTokenCounter(double multiplier) : multiplier_(multiplier) {
  if (!(multiplier > 0.0) || !std::isfinite(multiplier)) {
    throw std::invalid_argument("token multiplier must be a positive finite number");
  }
}

int WhitespaceTokenCounter::count(std::string_view text) const {
  const int pieces = count_whitespace_pieces(text);
  if (pieces == 0) return 0;
  // The epsilon keeps 10 * 1.3 at 13 rather than 14.
  const double scaled = std::ceil(pieces * multiplier_ - 1e-9);
  return std::max(1, static_cast<int>(scaled));
}

}  // namespace harmscope
