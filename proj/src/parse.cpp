#include "harmscope/parse.hpp"

#include <algorithm>
#include <array>

#include "harmscope/digest.hpp"

namespace harmscope {

namespace {

constexpr std::array<Anomaly, 6> kAllAnomalies = {
    Anomaly::kHadProse,    Anomaly::kHadDuplicates, Anomaly::kHadOutOfRange,
    Anomaly::kEmptyOutput, Anomaly::kUnparseable,   Anomaly::kNonCanonical,
};

bool is_ascii_space(char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

}  // namespace

std::string_view to_string(Anomaly anomaly) {
  switch (anomaly) {
    case Anomaly::kHadProse: return "had_prose";
    case Anomaly::kHadDuplicates: return "had_duplicates";
    case Anomaly::kHadOutOfRange: return "had_out_of_range";
    case Anomaly::kEmptyOutput: return "empty_output";
    case Anomaly::kUnparseable: return "unparseable";
    case Anomaly::kNonCanonical: return "non_canonical";
  }
  return "unknown";
}

std::vector<std::string> AnomalySet::names() const {
  std::vector<std::string> out;
  for (auto a : kAllAnomalies) {
    if (has(a)) out.emplace_back(to_string(a));
  }
  return out;
}

AnomalySet AnomalySet::from_names(const std::vector<std::string>& names) {
  AnomalySet set;
  for (const auto& name : names) {
    for (auto a : kAllAnomalies) {
      if (name == to_string(a)) set.set(a);
    }
  }
  return set;
}

ParsedIndexPrediction parse_index_list(std::string_view text, int max_index) {
  ParsedIndexPrediction out;
  out.raw_hash = sha256_hex(text);

  if (std::all_of(text.begin(), text.end(), is_ascii_space)) {
    out.anomalies.set(Anomaly::kEmptyOutput);
    return out;
  }

  bool saw_number = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (!is_digit(c)) {
      if (!is_ascii_space(c) && c != ',') out.anomalies.set(Anomaly::kHadProse);
      ++i;
      continue;
    }
    // Saturate instead of overflowing; anything past max_index is out of range anyway.
    long long value = 0;
    while (i < text.size() && is_digit(text[i])) {
      if (value <= max_index) value = value * 10 + (text[i] - '0');
      ++i;
    }
    saw_number = true;
    if (value < 1 || value > max_index) {
      out.anomalies.set(Anomaly::kHadOutOfRange);
    } else {
      out.indices.push_back(static_cast<int>(value));
    }
  }

  if (!saw_number) out.anomalies.set(Anomaly::kUnparseable);
  std::sort(out.indices.begin(), out.indices.end());
  const auto last = std::unique(out.indices.begin(), out.indices.end());
  if (last != out.indices.end()) {
    out.anomalies.set(Anomaly::kHadDuplicates);
    out.indices.erase(last, out.indices.end());
  }
  return out;
}

ParsedBinaryPrediction parse_yes_no(std::string_view text) {
  ParsedBinaryPrediction out;
  std::size_t i = 0;
  while (i < text.size() && !is_alpha(text[i])) ++i;
  std::string token;
  while (i < text.size() && is_alpha(text[i])) {
    token.push_back(static_cast<char>(text[i] | 0x20));
    ++i;
  }

  if (token == "yes") {
    out.label = Label::kHarmful;
  } else if (token == "no") {
    out.label = Label::kNonHarmful;
  } else {
    out.label = Label::kNonHarmful;
    out.anomalies.set(Anomaly::kUnparseable);
    return out;
  }

  auto begin = text.find_first_not_of(" \t\r\n");
  auto end = text.find_last_not_of(" \t\r\n");
  const auto trimmed = begin == std::string_view::npos ? std::string_view{} : text.substr(begin, end - begin + 1);
  if (trimmed != token) out.anomalies.set(Anomaly::kNonCanonical);
  return out;
}

std::string render_index_list(const std::vector<int>& indices) {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(indices[i]);
  }
  return out;
}

}  // namespace harmscope
