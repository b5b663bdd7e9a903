#pragma once

#include <cstdint>
#include <vector>

#include "harmscope/corpus.hpp"
#include "harmscope/tokenizer.hpp"

namespace harmscope {

/// Shape of a generated stand-in corpus. Label counts are exact:
/// round(size * harmful_fraction) harmful, of which
/// round(harmful * implicit_share) implicit.
struct SyntheticCorpusSpec {
  Dataset dataset;
  std::size_t size = 1000;
  double harmful_fraction = 0.3;
  double implicit_share = 0.5;
  // Whitespace pieces per sentence, uniform and label-independent.
  int min_words = 8;
  int max_words = 38;
  std::uint64_t seed = 1;
};

/// Deterministic labelled filler sentences for dry runs and tests.
std::vector<LabeledSentence> synthetic_sentences(const SyntheticCorpusSpec& spec, const TokenCounter& counter);

}  // namespace harmscope
