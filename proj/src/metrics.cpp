#include "harmscope/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace harmscope {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

std::string_view to_string(Aggregation aggregation) {
  return aggregation == Aggregation::kPooledMicro ? "pooled_micro" : "per_run_macro";
}

namespace {

void check_index_set(std::span<const int> set, std::int64_t total, const char* name) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i] < 1 || set[i] > total) {
      throw std::invalid_argument(std::string(name) + " index " + std::to_string(set[i]) +
                                  " outside 1.." + std::to_string(total));
    }
    if (i > 0 && set[i] <= set[i - 1]) {
      throw std::invalid_argument(std::string(name) + " indices must be strictly ascending");
    }
  }
}

ClassScores class_scores(std::int64_t hit, std::int64_t false_alarm, std::int64_t miss, bool& zero_division) {
  ClassScores s;
  const std::int64_t predicted = hit + false_alarm;
  const std::int64_t actual = hit + miss;
  if (predicted == 0 && actual == 0) return {100.0, 100.0, 100.0};
  if (predicted > 0) {
    s.precision = 100.0 * static_cast<double>(hit) / static_cast<double>(predicted);
  } else {
    zero_division = true;
  }
  if (actual > 0) {
    s.recall = 100.0 * static_cast<double>(hit) / static_cast<double>(actual);
  } else {
    zero_division = true;
  }
  // 2PR/(P+R) == 2*hit / (predicted + actual); the count form avoids rounding.
  s.f1 = 100.0 * 2.0 * static_cast<double>(hit) / static_cast<double>(predicted + actual);
  return s;
}

MetricReport score(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0) {
    throw std::invalid_argument("confusion counts must be non-negative");
  }
  MetricReport r;
  const auto harmful = harmful_scores(c, r.zero_division);
  const auto other = non_harmful_scores(c, r.zero_division);
  r.harmful_precision = harmful.precision;
  r.harmful_recall = harmful.recall;
  r.harmful_f1 = harmful.f1;
  r.non_harmful_precision = other.precision;
  r.non_harmful_recall = other.recall;
  r.non_harmful_f1 = other.f1;
  r.macro_f1 = (harmful.f1 + other.f1) / 2.0;
  r.support_total = c.total();
  r.ppv = r.support_total > 0 ? 100.0 * static_cast<double>(c.tp + c.fp) / static_cast<double>(r.support_total)
                              : 0.0;
  r.aggregation = Aggregation::kPooledMicro;
  return r;
}

}  // namespace

ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> truth, std::int64_t total) {
  if (total < 0) throw std::invalid_argument("total must be non-negative");
  check_index_set(predicted, total, "predicted");
  check_index_set(truth, total, "truth");
  ConfusionCounts c;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < predicted.size() || j < truth.size()) {
    if (j == truth.size() || (i < predicted.size() && predicted[i] < truth[j])) {
      ++c.fp;
      ++i;
    } else if (i == predicted.size() || truth[j] < predicted[i]) {
      ++c.fn;
      ++j;
    } else {
      ++c.tp;
      ++i;
      ++j;
    }
  }
  c.tn = total - c.tp - c.fp - c.fn;
  return c;
}

ClassScores harmful_scores(const ConfusionCounts& c, bool& zero_division) {
  return class_scores(c.tp, c.fp, c.fn, zero_division);
}

ClassScores non_harmful_scores(const ConfusionCounts& c, bool& zero_division) {
  return class_scores(c.tn, c.fn, c.fp, zero_division);
}

MetricReport pooled_metrics(std::span<const ConfusionCounts> counts) {
  if (counts.empty()) throw std::invalid_argument("pooled_metrics needs at least one run");
  ConfusionCounts sum;
  for (const auto& c : counts) sum += c;
  return score(sum);
}

MetricReport per_run_metrics(std::span<const ConfusionCounts> counts) {
  if (counts.empty()) throw std::invalid_argument("per_run_metrics needs at least one run");
  MetricReport mean;
  mean.aggregation = Aggregation::kPerRunMacro;
  for (const auto& c : counts) {
    if (c.total() <= 0) throw std::invalid_argument("per-run metrics need runs with total > 0");
    const auto r = score(c);
    mean.macro_f1 += r.macro_f1;
    mean.ppv += r.ppv;
    mean.harmful_precision += r.harmful_precision;
    mean.harmful_recall += r.harmful_recall;
    mean.harmful_f1 += r.harmful_f1;
    mean.non_harmful_precision += r.non_harmful_precision;
    mean.non_harmful_recall += r.non_harmful_recall;
    mean.non_harmful_f1 += r.non_harmful_f1;
    mean.support_total += r.support_total;
    mean.zero_division = mean.zero_division || r.zero_division;
  }
  const auto n = static_cast<double>(counts.size());
  for (double* field : {&mean.macro_f1, &mean.ppv, &mean.harmful_precision, &mean.harmful_recall,
                        &mean.harmful_f1, &mean.non_harmful_precision, &mean.non_harmful_recall,
                        &mean.non_harmful_f1}) {
    *field /= n;
  }
  return mean;
}

double calibration_gap(const MetricReport& report, double nominal_r) { return report.ppv - 100.0 * nominal_r; }

}  // namespace harmscope
