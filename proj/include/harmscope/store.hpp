#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmscope/parse.hpp"

namespace harmscope {

enum class TrialStatus { kOk, kFailed };

struct TrialRecord {
  std::string setting_id;
  nlohmann::json axes;  // Setting::axes_json of the owning setting
  std::int64_t trial_index = 0;
  std::uint64_t seed = 0;
  std::vector<int> truth_indices;
  std::optional<std::vector<int>> predicted_indices;  // absent when failed
  AnomalySet anomalies;
  std::optional<std::string> raw_text;  // verbatim model output; absent when failed
  std::string raw_hash;
  std::vector<std::string> sentence_ids;  // sentence_ids[i] carries index i + 1
  int realized_tokens = 0;
  double realized_harm_ratio = 0.0;
  std::int64_t latency_ms = 0;
  TrialStatus status = TrialStatus::kOk;
  std::string failure_reason;

  int max_index() const { return static_cast<int>(sentence_ids.size()); }

  nlohmann::json to_json() const;
  static TrialRecord from_json(const nlohmann::json& j);
};

class StoreCorruption : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON line per record with a trailing "checksum" member computed over
/// the rest of the line.
std::string encode_record_line(const TrialRecord& record);
/// Throws StoreCorruption when the line fails to parse or its checksum differs.
TrialRecord decode_record_line(const std::string& line);

/// Append-only store keyed by (setting_id, trial_index).
///
/// Opening the store indexes the existing records. A final line without a
/// newline (a write cut short by a crash) is dropped and truncated away; any
/// other bad line is corruption. append() is serialized and flushed per record.
class TrialStore {
 public:
  explicit TrialStore(std::filesystem::path path);

  bool contains(const std::string& setting_id, std::int64_t trial_index) const;
  std::size_t size() const;
  void append(const TrialRecord& record);

  const std::filesystem::path& path() const { return path_; }
  bool repaired_tail() const { return repaired_tail_; }

  /// Reads and validates every record in file order.
  static std::vector<TrialRecord> read_all(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::set<std::pair<std::string, std::int64_t>> keys_;
  bool repaired_tail_ = false;
};

}  // namespace harmscope
