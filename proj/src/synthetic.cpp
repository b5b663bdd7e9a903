#include "harmscope/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "harmscope/rng.hpp"

namespace harmscope {

namespace {

constexpr const char* kWords[] = {"the",   "a",     "river", "market", "green",  "quietly", "window", "seven",
                                  "paper", "stone", "runs",  "over",   "bright", "under",   "garden", "slow",
                                  "table", "city",  "blue",  "light",  "north",  "coffee",  "letter", "early"};

}  // namespace

std::vector<LabeledSentence> synthetic_sentences(const SyntheticCorpusSpec& spec, const TokenCounter& counter) {
  if (spec.size == 0) throw std::invalid_argument("synthetic corpus size must be positive");
  if (spec.min_words < 1 || spec.max_words < spec.min_words) {
    throw std::invalid_argument("synthetic corpus word range is empty");
  }
  const auto harmful = static_cast<std::size_t>(std::llround(static_cast<double>(spec.size) * spec.harmful_fraction));
  const auto implicit = static_cast<std::size_t>(std::llround(static_cast<double>(harmful) * spec.implicit_share));
  if (harmful > spec.size) throw std::invalid_argument("harmful fraction exceeds 1");

  // Label slots: implicit, explicit, then non-harmful, shuffled into place.
  std::vector<int> kinds(spec.size, 2);
  for (std::size_t i = 0; i < harmful; ++i) kinds[i] = i < implicit ? 0 : 1;
  Rng rng(spec.seed);
  rng.shuffle(std::span<int>(kinds));

  const auto vocab = static_cast<std::uint64_t>(std::size(kWords));
  const auto span = static_cast<std::uint64_t>(spec.max_words - spec.min_words + 1);
  std::vector<LabeledSentence> out;
  out.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    LabeledSentence s;
    s.id = spec.dataset.name() + ":" + std::to_string(i + 1);
    s.dataset = spec.dataset;
    const int words = spec.min_words + static_cast<int>(rng.below(span));
    s.text = "s" + std::to_string(i + 1);
    for (int w = 1; w < words; ++w) {
      s.text += ' ';
      s.text += kWords[rng.below(vocab)];
    }
    s.text += '.';
    switch (kinds[i]) {
      case 0: s.label = Label::kHarmful; s.harm_type = HarmType::kImplicit; break;
      case 1: s.label = Label::kHarmful; s.harm_type = HarmType::kExplicit; break;
      default: s.label = Label::kNonHarmful; s.harm_type = HarmType::kNotApplicable; break;
    }
    s.token_count = counter.count(s.text);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace harmscope
