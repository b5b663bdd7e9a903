#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "harmscope/rng.hpp"
#include "harmscope/tokenizer.hpp"

namespace harmscope {

enum class Label { kHarmful, kNonHarmful };
enum class HarmType { kExplicit, kImplicit, kNotApplicable };
enum class Stratum { kHarmfulExplicit, kHarmfulImplicit, kHarmfulAny, kNonHarmful };

std::string_view to_string(Label label);
std::string_view to_string(HarmType type);
std::string_view to_string(Stratum stratum);
Label parse_label(std::string_view text);
HarmType parse_harm_type(std::string_view text);

/// Source dataset. Known names map to the built-in kinds; anything else is custom.
struct Dataset {
  enum class Kind { kIhc, kOffensEval, kJigsawToxic, kCustom };

  Kind kind = Kind::kCustom;
  std::string custom_name;

  static Dataset from_name(std::string_view name);
  std::string name() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct LabeledSentence {
  std::string id;
  std::string text;
  Label label = Label::kNonHarmful;
  HarmType harm_type = HarmType::kNotApplicable;
  Dataset dataset;
  int token_count = 0;

  bool harmful() const { return label == Label::kHarmful; }
};

struct CorpusStats {
  std::size_t total = 0;
  std::size_t harmful = 0;
  std::size_t harmful_explicit = 0;
  std::size_t harmful_implicit = 0;
  std::size_t non_harmful = 0;
  double harmful_fraction = 0.0;
  double implicit_fraction_of_harmful = 0.0;
  double mean_token_count = 0.0;
  int max_token_count = 0;
  int max_harmful_token_count = 0;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplingError : public std::runtime_error {
 public:
  SamplingError(Stratum stratum, std::size_t requested, std::size_t available);

  Stratum stratum() const { return stratum_; }
  std::size_t shortfall() const { return shortfall_; }

 private:
  Stratum stratum_;
  std::size_t shortfall_;
};

/// Validated, immutable sentence collection with per-stratum index lists.
class SentencePool {
 public:
  /// Throws CorpusError on invariant violations (empty pool, duplicate id,
  /// label/harm_type mismatch, blank text, token_count < 1).
  explicit SentencePool(std::vector<LabeledSentence> sentences);

  std::span<const LabeledSentence> sentences() const { return sentences_; }
  const LabeledSentence& at(std::size_t position) const { return sentences_.at(position); }
  std::size_t size() const { return sentences_.size(); }

  /// Pool positions of the stratum members, in pool order.
  std::span<const std::size_t> stratum(Stratum which) const;

  const CorpusStats& stats() const { return stats_; }

  /// Pool position of a sentence id, if present.
  std::optional<std::size_t> find(std::string_view id) const;

 private:
  std::vector<LabeledSentence> sentences_;
  std::vector<std::size_t> explicit_;
  std::vector<std::size_t> implicit_;
  std::vector<std::size_t> harmful_any_;
  std::vector<std::size_t> non_harmful_;
  std::vector<std::size_t> by_id_;  // positions sorted by id
  CorpusStats stats_;
};

/// Reads line-delimited JSON records {id?, text, label, harm_type?, token_count?}.
/// token_count, when present, is trusted (pool caches carry it); otherwise the
/// tokenizer computes it. Missing ids become "<dataset>:<line>".
SentencePool load_corpus(const std::filesystem::path& path, const Dataset& dataset,
                         const TokenCounter& tokenizer);

SentencePool parse_corpus(std::string_view jsonl, const Dataset& dataset,
                          const TokenCounter& tokenizer);

/// Writes the pool as a cache in the same record format, token counts included.
void write_pool_cache(const SentencePool& pool, const std::filesystem::path& path);

CorpusStats corpus_stats(std::span<const LabeledSentence> sentences);

/// Draws distinct stratum members in uniformly random order, one at a time.
class StratumDraw {
 public:
  StratumDraw(const SentencePool& pool, Stratum stratum, Rng& rng);

  /// Next sentence, or nullptr once the stratum is exhausted.
  const LabeledSentence* next();
  std::size_t remaining() const { return order_.size() - drawn_; }
  Stratum stratum() const { return stratum_; }

 private:
  const SentencePool& pool_;
  Stratum stratum_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t drawn_ = 0;
};

/// count distinct sentences from the stratum; throws SamplingError when the
/// population is smaller than count.
std::vector<LabeledSentence> sample_stratum(const SentencePool& pool, Stratum stratum,
                                            std::size_t count, Rng& rng);

}  // namespace harmscope
