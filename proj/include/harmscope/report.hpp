#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmscope/metrics.hpp"
#include "harmscope/setting.hpp"
#include "harmscope/store.hpp"

namespace harmscope {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SettingReport {
  Setting setting;  // trials holds the number of records seen
  std::vector<ConfusionCounts> trial_counts;  // ok trials, in trial order
  ConfusionCounts pooled_counts;
  std::optional<MetricReport> pooled;   // absent when no trial succeeded
  std::optional<MetricReport> per_run;
  std::optional<MetricReport> baseline;
  std::size_t ok_trials = 0;
  std::size_t failed_trials = 0;
  std::size_t n_sentences = 0;  // sentence slots over ok trials
  /// Sentence ids seen in ok trials, sorted and deduplicated.
  std::vector<std::string> sentence_ids;
  /// Share of harmful indices over all ok prompts (what an oracle's ppv equals).
  double realized_prevalence = 0.0;
  double mean_realized_harm_ratio = 0.0;  // token-weighted, averaged over trials
  double mean_realized_tokens = 0.0;

  double failure_rate() const;
};

/// Per-sentence outcome from a sentence-level run.
struct SentenceOutcome {
  bool harmful = false;
  bool flagged = false;
};

/// (dataset, model, category) -> sentence id -> outcome.
using BaselineKey = std::tuple<std::string, std::string, std::string>;
using BaselineIndex = std::map<BaselineKey, std::map<std::string, SentenceOutcome>>;

BaselineKey baseline_key(const Setting& setting);

struct Aggregate {
  std::vector<SettingReport> reports;  // deterministic order
  BaselineIndex baselines;
  std::size_t records = 0;
};

/// Groups records by setting and scores each group both ways. Sentence-level
/// companions become baselines for long-context settings whose sentences they
/// fully cover. Throws ReportError on empty input.
Aggregate aggregate(const std::vector<TrialRecord>& records);
Aggregate aggregate_store(const std::filesystem::path& store_path);

/// Baseline over a set of sentence ids, or nullopt if any id is missing.
std::optional<MetricReport> baseline_metrics(const std::map<std::string, SentenceOutcome>& outcomes,
                                             const std::vector<std::string>& sentence_ids);

/// tables/<mode>.csv and tables/<mode>.json for each mode present. Returns the paths written.
std::vector<std::filesystem::path> emit_tables(const Aggregate& agg, const std::filesystem::path& out_dir);

/// plotdata/<family>.csv for prevalence, dilution, region and type; families
/// without reports are skipped. Returns family -> path for files written.
std::map<std::string, std::filesystem::path> emit_plotdata(const Aggregate& agg, const std::filesystem::path& out_dir);

/// Writes tables, plot data and summary.json.
nlohmann::json emit_report(const Aggregate& agg, const std::filesystem::path& out_dir, bool with_plotdata = true);

std::string csv_field(const std::string& value);

}  // namespace harmscope
