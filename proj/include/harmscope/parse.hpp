#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "harmscope/corpus.hpp"

namespace harmscope {

enum class Anomaly : std::uint8_t {
  kHadProse = 1u << 0,
  kHadDuplicates = 1u << 1,
  kHadOutOfRange = 1u << 2,
  kEmptyOutput = 1u << 3,
  kUnparseable = 1u << 4,
  kNonCanonical = 1u << 5,
};

/// Bit set of Anomaly flags.
class AnomalySet {
 public:
  AnomalySet() = default;

  void set(Anomaly a) { bits_ |= static_cast<std::uint8_t>(a); }
  bool has(Anomaly a) const { return (bits_ & static_cast<std::uint8_t>(a)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::uint8_t bits() const { return bits_; }

  /// Flag names in declaration order.
  std::vector<std::string> names() const;
  static AnomalySet from_names(const std::vector<std::string>& names);

  friend bool operator==(const AnomalySet&, const AnomalySet&) = default;

 private:
  std::uint8_t bits_ = 0;
};

std::string_view to_string(Anomaly anomaly);

struct ParsedIndexPrediction {
  std::vector<int> indices;  // strictly ascending, within 1..max_index
  AnomalySet anomalies;
  std::string raw_hash;
};

struct ParsedBinaryPrediction {
  Label label = Label::kNonHarmful;
  AnomalySet anomalies;
};

/// Extracts every decimal integer from the text. Values outside 1..max_index
/// are dropped, duplicates removed, the rest sorted. Any character other than
/// digits, ASCII whitespace and commas marks the output as prose. Never throws.
ParsedIndexPrediction parse_index_list(std::string_view text, int max_index);

/// First alphabetic token, case-insensitive: "yes" is harmful, "no" is not.
/// Anything else falls back to non-harmful with the unparseable flag.
ParsedBinaryPrediction parse_yes_no(std::string_view text);

/// "3, 7, 12" — the answer format the long-context prompt asks for.
std::string render_index_list(const std::vector<int>& indices);

}  // namespace harmscope
