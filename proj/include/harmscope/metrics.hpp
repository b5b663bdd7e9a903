#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace harmscope {

/// Harmful is the positive class.
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& other);
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

enum class Aggregation { kPooledMicro, kPerRunMacro };
std::string_view to_string(Aggregation aggregation);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// All percentages in [0, 100], carried at full precision.
struct MetricReport {
  double macro_f1 = 0.0;
  double ppv = 0.0;
  double harmful_precision = 0.0;
  double harmful_recall = 0.0;
  double harmful_f1 = 0.0;
  double non_harmful_precision = 0.0;
  double non_harmful_recall = 0.0;
  double non_harmful_f1 = 0.0;
  std::int64_t support_total = 0;
  Aggregation aggregation = Aggregation::kPooledMicro;
  double parse_failure_rate = 0.0;
  /// Some precision/recall/F1 hit a 0/0 and was set to 0.
  bool zero_division = false;
};

/// Throws std::invalid_argument unless both sets lie within 1..total.
ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> truth, std::int64_t total);

/// Per-class scores in percent. A class with no truth members and no
/// predictions scores 100 across the board; any other 0/0 scores 0 and sets
/// zero_division.
ClassScores harmful_scores(const ConfusionCounts& c, bool& zero_division);
ClassScores non_harmful_scores(const ConfusionCounts& c, bool& zero_division);

/// Sums the counts, then scores once. Throws std::invalid_argument on empty input.
MetricReport pooled_metrics(std::span<const ConfusionCounts> counts);

/// Scores each run, then takes the unweighted mean of every metric.
MetricReport per_run_metrics(std::span<const ConfusionCounts> counts);

/// ppv - 100 * nominal_r, in percentage points.
double calibration_gap(const MetricReport& report, double nominal_r);

}  // namespace harmscope
