#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "harmscope/corpus.hpp"
#include "harmscope/synthesis.hpp"
#include "harmscope/templates.hpp"

namespace harmscope {

enum class RunMode { kPrevalence, kDilution, kRegion, kType, kSentenceLevel, kSentenceLevelBalanced };

std::string_view to_string(RunMode mode);
/// Accepts both "sentence_level" and the CLI spelling "sentence-level".
RunMode parse_run_mode(std::string_view text);
bool is_long_context(RunMode mode);

/// One grid point: every axis value plus the number of trials to run.
struct Setting {
  std::string setting_id;
  RunMode mode = RunMode::kPrevalence;
  std::optional<PromptSpec> spec;  // absent for the sentence-level modes
  Dataset dataset;
  Category category = Category::kToxic;
  std::string model;
  int trials = 1;
  std::optional<std::uint64_t> balance_seed;  // sentence_level_balanced only

  /// "mode=...;dataset=...;..." over the axes that apply to the mode. Trials
  /// are not an axis, so growing k keeps existing trials addressable.
  std::string canonical_axes() const;

  nlohmann::json axes_json() const;
  /// Rebuilds a setting (id included) from axes_json output; trials is left at 0.
  static Setting from_axes_json(const nlohmann::json& axes);
};

/// First 16 hex digits of SHA-256 over the canonical axes.
std::string make_setting_id(const Setting& setting);

/// Shortest round-trip decimal form of a double ("0.05", "0.25").
std::string format_ratio(double value);

}  // namespace harmscope
