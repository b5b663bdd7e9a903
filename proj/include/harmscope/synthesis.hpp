#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "harmscope/corpus.hpp"
#include "harmscope/rng.hpp"
#include "harmscope/templates.hpp"

namespace harmscope {

enum class SizingMode { kTokenBudget, kSentenceCount };
enum class Region { kBeginning, kMiddle, kEnd, kAll };
enum class HarmSelection { kExplicit, kImplicit, kBoth };

std::string_view to_string(SizingMode mode);
std::string_view to_string(Region region);
std::string_view to_string(HarmSelection selection);
Region parse_region(std::string_view text);
HarmSelection parse_harm_selection(std::string_view text);

class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One point of the prompt-construction space.
struct PromptSpec {
  SizingMode mode = SizingMode::kTokenBudget;
  int budget_tokens = 0;   // token-budget mode
  double harm_ratio = 0.0; // token-budget mode
  int sentence_count = 0;  // sentence-count mode
  int harmful_count = 0;   // sentence-count mode
  Region region = Region::kAll;
  HarmSelection harm_type = HarmSelection::kBoth;
  Category category = Category::kToxic;
  std::uint64_t seed = 0;

  /// Throws SynthesisError when the mode's invariants do not hold.
  void validate() const;
};

struct SynthesisOptions {
  /// Numbered block joined by '\n' instead of a single space.
  bool newline_separated = false;
  /// Appends "\nAnswer:" after the long-context sentence block.
  bool answer_suffix = true;
  /// Share of explicit draws when harm_type is both; nullopt draws from the
  /// union of both harmful strata (natural pool proportions).
  std::optional<double> explicit_share;
};

struct BudgetFill {
  std::vector<LabeledSentence> harmful;
  std::vector<LabeledSentence> non_harmful;
  int harmful_tokens = 0;
  int non_harmful_tokens = 0;
  // Token-budget targets and the tolerated shortfall when a stratum ran dry.
  double harmful_target = 0.0;
  double non_harmful_target = 0.0;
  bool harmful_exhausted = false;
  bool non_harmful_exhausted = false;
};

struct NumberedSentence {
  int index = 0;
  LabeledSentence sentence;
};

struct ConstructedPrompt {
  std::vector<NumberedSentence> items;
  std::vector<int> truth_indices;
  int realized_tokens = 0;
  double realized_harm_ratio = 0.0;
  std::string rendered_text;
  bool budget_exhausted = false;

  int size() const { return static_cast<int>(items.size()); }
};

/// Samples the harmful and non-harmful sentences for a spec.
///
/// Token-budget mode appends sampled sentences until the next one would push
/// the stratum past its target (p*r harmful, then the remainder toward p).
/// Running out of sentences below 80% of a target throws SynthesisError; above
/// that the shortfall is tolerated and flagged. Sentence-count mode draws
/// exactly n harmful and s-n non-harmful sentences.
BudgetFill fill_budget(const SentencePool& pool, const PromptSpec& spec, Rng& rng,
                       const SynthesisOptions& options = {});

/// 1-based inclusive position range of a region among m positions. Thirds use
/// floor division: [1, m/3], [m/3+1, 2m/3], [2m/3+1, m].
std::pair<int, int> region_bounds(Region region, int m);

/// Orders the sentences so the harmful ones land in the region's third.
/// Throws SynthesisError when the third cannot hold every harmful sentence.
std::vector<LabeledSentence> place_region(std::vector<LabeledSentence> harmful,
                                          std::vector<LabeledSentence> non_harmful, Region region,
                                          Rng& rng);

/// "1. <s1> 2. <s2> ..." (or one per line).
std::string render_numbered_block(const std::vector<NumberedSentence>& items, bool newline_separated);

ConstructedPrompt build_prompt(const SentencePool& pool, const PromptSpec& spec,
                               const InstructionTemplate& tmpl, Rng& rng,
                               const SynthesisOptions& options = {});

/// Seeds the generator from spec.seed.
ConstructedPrompt build_prompt(const SentencePool& pool, const PromptSpec& spec,
                               const InstructionTemplate& tmpl, const SynthesisOptions& options = {});

std::string render_sentence_level(const InstructionTemplate& tmpl, const LabeledSentence& sentence);

/// Stable across platforms: SHA-256 over (master_seed, setting_id, trial_index).
std::uint64_t derive_trial_seed(std::uint64_t master_seed, std::string_view setting_id,
                                std::uint64_t trial_index);

}  // namespace harmscope
