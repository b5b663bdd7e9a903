#include "harmscope/store.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "harmscope/digest.hpp"

namespace harmscope {

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::string checksum_of(const json& body) { return sha256_hex(dump(body)).substr(0, 16); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

json TrialRecord::to_json() const {
  json j = {{"setting_id", setting_id},
            {"axes", axes},
            {"trial_index", trial_index},
            {"seed", seed},
            {"truth_indices", truth_indices},
            {"anomalies", anomalies.names()},
            {"raw_hash", raw_hash},
            {"sentence_ids", sentence_ids},
            {"realized_tokens", realized_tokens},
            {"realized_harm_ratio", realized_harm_ratio},
            {"latency_ms", latency_ms},
            {"status", status == TrialStatus::kOk ? "ok" : "failed"}};
  if (predicted_indices) j["predicted_indices"] = *predicted_indices;
  if (raw_text) j["raw_text"] = *raw_text;
  if (!failure_reason.empty()) j["failure_reason"] = failure_reason;
  return j;
}

TrialRecord TrialRecord::from_json(const json& j) {
  TrialRecord r;
  r.setting_id = j.at("setting_id").get<std::string>();
  r.axes = j.at("axes");
  r.trial_index = j.at("trial_index").get<std::int64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.truth_indices = j.at("truth_indices").get<std::vector<int>>();
  r.anomalies = AnomalySet::from_names(j.at("anomalies").get<std::vector<std::string>>());
  r.raw_hash = j.at("raw_hash").get<std::string>();
  r.sentence_ids = j.at("sentence_ids").get<std::vector<std::string>>();
  r.realized_tokens = j.at("realized_tokens").get<int>();
  r.realized_harm_ratio = j.at("realized_harm_ratio").get<double>();
  r.latency_ms = j.at("latency_ms").get<std::int64_t>();
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    r.status = TrialStatus::kOk;
  } else if (status == "failed") {
    r.status = TrialStatus::kFailed;
  } else {
    throw StoreCorruption("unknown record status '" + status + "'");
  }
  if (j.contains("predicted_indices")) r.predicted_indices = j.at("predicted_indices").get<std::vector<int>>();
  if (j.contains("raw_text")) r.raw_text = j.at("raw_text").get<std::string>();
  if (j.contains("failure_reason")) r.failure_reason = j.at("failure_reason").get<std::string>();
  if (r.status == TrialStatus::kFailed && r.predicted_indices) {
    throw StoreCorruption("failed record carries predicted indices");
  }
  return r;
}

std::string encode_record_line(const TrialRecord& record) {
  // Spliced in by hand: the serializer sorts keys, and the checksum goes last.
  auto line = dump(record.to_json());
  const auto sum = sha256_hex(line).substr(0, 16);
  line.pop_back();
  return line + ",\"checksum\":\"" + sum + "\"}";
}

TrialRecord decode_record_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw StoreCorruption(std::string("unparseable record: ") + e.what());
  }
  if (!j.is_object() || !j.contains("checksum") || !j["checksum"].is_string()) {
    throw StoreCorruption("record has no checksum");
  }
  const auto stored = j["checksum"].get<std::string>();
  j.erase("checksum");
  if (checksum_of(j) != stored) throw StoreCorruption("checksum mismatch");
  try {
    return TrialRecord::from_json(j);
  } catch (const json::exception& e) {
    throw StoreCorruption(std::string("malformed record: ") + e.what());
  }
}

std::vector<TrialRecord> TrialStore::read_all(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw StoreCorruption("store '" + path.string() + "' does not exist");
  const auto content = read_file(path);
  std::vector<TrialRecord> records;
  std::set<std::pair<std::string, std::int64_t>> seen;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const auto end = content.find('\n', start);
    ++line_no;
    if (end == std::string::npos) break;  // torn tail: ignored by readers
    const auto line = content.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    try {
      auto record = decode_record_line(line);
      if (!seen.emplace(record.setting_id, record.trial_index).second) {
        throw StoreCorruption("duplicate key (" + record.setting_id + ", " + std::to_string(record.trial_index) + ")");
      }
      records.push_back(std::move(record));
    } catch (const StoreCorruption& e) {
      throw StoreCorruption(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

TrialStore::TrialStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (!std::filesystem::exists(path_)) {
    std::ofstream touch(path_, std::ios::binary | std::ios::app);
    if (!touch) throw StoreCorruption("cannot create store '" + path_.string() + "'");
    return;
  }
  const auto content = read_file(path_);
  const auto last_newline = content.rfind('\n');
  const std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete < content.size()) {
    std::filesystem::resize_file(path_, complete);
    repaired_tail_ = true;
  }
  for (const auto& record : read_all(path_)) keys_.emplace(record.setting_id, record.trial_index);
}

bool TrialStore::contains(const std::string& setting_id, std::int64_t trial_index) const {
  std::lock_guard lock(mutex_);
  return keys_.count({setting_id, trial_index}) > 0;
}

std::size_t TrialStore::size() const {
  std::lock_guard lock(mutex_);
  return keys_.size();
}

void TrialStore::append(const TrialRecord& record) {
  const auto line = encode_record_line(record) + '\n';
  std::lock_guard lock(mutex_);
  if (!keys_.emplace(record.setting_id, record.trial_index).second) {
    throw StoreCorruption("record (" + record.setting_id + ", " + std::to_string(record.trial_index) +
                          ") is already in the store");
  }
  std::FILE* file = std::fopen(path_.c_str(), "ab");
  if (file == nullptr) throw StoreCorruption("cannot open store '" + path_.string() + "' for append");
  const bool ok = std::fwrite(line.data(), 1, line.size(), file) == line.size() && std::fflush(file) == 0;
  std::fclose(file);
  if (!ok) keys_.erase({record.setting_id, record.trial_index});
  if (!ok) throw StoreCorruption("failed writing to store '" + path_.string() + "'");
}

}  // namespace harmscope
