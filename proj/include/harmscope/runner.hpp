#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "harmscope/backend.hpp"
#include "harmscope/config.hpp"
#include "harmscope/corpus.hpp"
#include "harmscope/setting.hpp"
#include "harmscope/store.hpp"
#include "harmscope/templates.hpp"
#include "harmscope/tokenizer.hpp"

namespace harmscope {

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Instruction templates per (category, setting): built-ins unless overridden.
class TemplateSet {
 public:
  TemplateSet() = default;
  explicit TemplateSet(const std::map<std::string, std::filesystem::path>& overrides);

  const InstructionTemplate& get(Category category, PromptSetting setting) const;
  void set(InstructionTemplate tmpl);

 private:
  std::map<std::pair<Category, PromptSetting>, InstructionTemplate> overrides_;
};

using PoolMap = std::map<std::string, SentencePool>;

/// Everything a trial needs besides its setting. Backends and pools must
/// outlive the context.
struct RunContext {
  const ExperimentConfig* config = nullptr;
  const PoolMap* pools = nullptr;
  Backend* backend = nullptr;
  TemplateSet templates;
  std::shared_ptr<const TokenCounter> counter;
};

/// Loads every configured dataset, keyed by dataset name.
PoolMap load_pools(const ExperimentConfig& config, const TokenCounter& counter);

/// "mock:<kind>[:params]" builds a MockDetector; "openai" an OpenAiClient
/// with credentials from the environment or the configured key file.
std::unique_ptr<Backend> make_backend(const BackendConfig& config, std::shared_ptr<const TokenCounter> counter);

/// Settings for one mode across every configured dataset. Sentence-level
/// modes need the pools to size their trials. Throws GridError on invalid
/// axis values or dilution pairs with n >= s.
std::vector<Setting> expand_grid(const ExperimentConfig& config, RunMode mode, const PoolMap& pools);

/// Seeds for the balanced sentence-level runs (configured or derived).
std::vector<std::uint64_t> balanced_seeds(const ExperimentConfig& config);

/// Every harmful sentence plus an equal-sized seeded sample of non-harmful
/// ones, as pool positions in ascending order.
std::vector<std::size_t> balanced_subset(const SentencePool& pool, std::uint64_t seed);

/// Builds the prompt (or picks the sentence), queries the backend and parses
/// the answer. Construction, context-window and transport problems come back
/// as failed records, never as exceptions.
TrialRecord run_trial(const Setting& setting, std::int64_t trial_index, const RunContext& ctx);

struct RunOptions {
  /// Stop after this many newly executed trials (simulates an interruption).
  std::optional<std::size_t> max_new_trials;
};

struct RunSummary {
  std::size_t settings = 0;
  std::size_t trials_total = 0;
  std::size_t executed_ok = 0;
  std::size_t executed_failed = 0;
  std::size_t skipped = 0;
  bool interrupted = false;
  std::map<std::string, std::size_t> failure_reasons;  // reason prefix -> count
};

/// Runs every (setting, trial) pair missing from the store on
/// config.concurrency workers, appending records as they finish.
RunSummary run_grid(const std::vector<Setting>& settings, TrialStore& store, const RunContext& ctx,
                    const RunOptions& options = {});

/// One record set per seed; each evaluates the balanced subset sentence by sentence.
std::vector<std::vector<TrialRecord>> run_sentence_level_balanced(const Dataset& dataset,
                                                                  const std::vector<std::uint64_t>& seeds,
                                                                  const RunContext& ctx);

}  // namespace harmscope
