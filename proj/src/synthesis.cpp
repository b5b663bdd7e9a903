#include "harmscope/synthesis.hpp"

#include <algorithm>
#include <cmath>

#include "harmscope/digest.hpp"

namespace harmscope {

std::string_view to_string(SizingMode mode) {
  return mode == SizingMode::kTokenBudget ? "token_budget" : "sentence_count";
}

std::string_view to_string(Region region) {
  switch (region) {
    case Region::kBeginning: return "beginning";
    case Region::kMiddle: return "middle";
    case Region::kEnd: return "end";
    case Region::kAll: return "all";
  }
  return "all";
}

std::string_view to_string(HarmSelection selection) {
  switch (selection) {
    case HarmSelection::kExplicit: return "explicit";
    case HarmSelection::kImplicit: return "implicit";
    case HarmSelection::kBoth: return "both";
  }
  return "both";
}

Region parse_region(std::string_view text) {
  if (text == "beginning") return Region::kBeginning;
  if (text == "middle") return Region::kMiddle;
  if (text == "end") return Region::kEnd;
  if (text == "all") return Region::kAll;
  throw SynthesisError("unknown region '" + std::string(text) + "'");
}

HarmSelection parse_harm_selection(std::string_view text) {
  if (text == "explicit") return HarmSelection::kExplicit;
  if (text == "implicit") return HarmSelection::kImplicit;
  if (text == "both") return HarmSelection::kBoth;
  throw SynthesisError("unknown harm type '" + std::string(text) + "'");
}

void PromptSpec::validate() const {
  if (mode == SizingMode::kTokenBudget) {
    if (budget_tokens < 1) throw SynthesisError("token budget must be >= 1");
    if (!(harm_ratio >= 0.0 && harm_ratio <= 1.0)) throw SynthesisError("harm ratio must lie in [0, 1]");
  } else {
    if (harmful_count < 1 || harmful_count >= sentence_count) {
      throw SynthesisError("sentence-count mode needs 1 <= n < s (n=" + std::to_string(harmful_count) +
                           ", s=" + std::to_string(sentence_count) + ")");
    }
  }
}

namespace {

/// Harmful draw for the spec's harm type, optionally with a fixed explicit mix.
class HarmfulDraw {
 public:
  HarmfulDraw(const SentencePool& pool, HarmSelection selection, std::optional<double> explicit_share,
              Rng& rng)
      : rng_(rng), share_(selection == HarmSelection::kBoth ? explicit_share : std::nullopt) {
    if (share_) {
      explicit_.emplace(pool, Stratum::kHarmfulExplicit, rng);
      implicit_.emplace(pool, Stratum::kHarmfulImplicit, rng);
    } else {
      const Stratum stratum = selection == HarmSelection::kExplicit   ? Stratum::kHarmfulExplicit
                              : selection == HarmSelection::kImplicit ? Stratum::kHarmfulImplicit
                                                                      : Stratum::kHarmfulAny;
      single_.emplace(pool, stratum, rng);
    }
  }

  const LabeledSentence* next() {
    if (single_) return single_->next();
    const bool want_explicit = rng_.bernoulli(*share_);
    auto& first = want_explicit ? *explicit_ : *implicit_;
    auto& second = want_explicit ? *implicit_ : *explicit_;
    if (const auto* s = first.next()) return s;
    return second.next();
  }

  Stratum stratum() const { return single_ ? single_->stratum() : Stratum::kHarmfulAny; }

 private:
  Rng& rng_;
  std::optional<double> share_;
  std::optional<StratumDraw> single_;
  std::optional<StratumDraw> explicit_;
  std::optional<StratumDraw> implicit_;
};

constexpr double kMinBudgetFill = 0.8;

template <typename Draw>
int fill_to_target(Draw& draw, double target, std::vector<LabeledSentence>& out, bool& exhausted) {
  int tokens = 0;
  while (true) {
    const auto* s = draw.next();
    if (s == nullptr) {
      exhausted = true;
      break;
    }
    if (tokens + s->token_count > target) break;
    tokens += s->token_count;
    out.push_back(*s);
  }
  if (exhausted && tokens < kMinBudgetFill * target) {
    throw SynthesisError("stratum " + std::string(to_string(draw.stratum())) + " exhausted at " +
                         std::to_string(tokens) + " of " + std::to_string(target) + " target tokens");
  }
  return tokens;
}

int sum_tokens(const std::vector<LabeledSentence>& sentences) {
  int total = 0;
  for (const auto& s : sentences) total += s.token_count;
  return total;
}

}  // namespace

BudgetFill fill_budget(const SentencePool& pool, const PromptSpec& spec, Rng& rng,
                       const SynthesisOptions& options) {
  spec.validate();
  if (options.explicit_share && !(*options.explicit_share >= 0.0 && *options.explicit_share <= 1.0)) {
    throw SynthesisError("explicit share must lie in [0, 1]");
  }
  BudgetFill fill;
  HarmfulDraw harmful(pool, spec.harm_type, options.explicit_share, rng);

  if (spec.mode == SizingMode::kSentenceCount) {
    for (int i = 0; i < spec.harmful_count; ++i) {
      const auto* s = harmful.next();
      if (s == nullptr) {
        throw SamplingError(harmful.stratum(), static_cast<std::size_t>(spec.harmful_count),
                            static_cast<std::size_t>(i));
      }
      fill.harmful.push_back(*s);
    }
    fill.non_harmful = sample_stratum(pool, Stratum::kNonHarmful,
                                      static_cast<std::size_t>(spec.sentence_count - spec.harmful_count), rng);
    fill.harmful_tokens = sum_tokens(fill.harmful);
    fill.non_harmful_tokens = sum_tokens(fill.non_harmful);
    return fill;
  }

  fill.harmful_target = static_cast<double>(spec.budget_tokens) * spec.harm_ratio;
  fill.harmful_tokens = fill_to_target(harmful, fill.harmful_target, fill.harmful, fill.harmful_exhausted);

  fill.non_harmful_target = static_cast<double>(spec.budget_tokens - fill.harmful_tokens);
  StratumDraw non_harmful(pool, Stratum::kNonHarmful, rng);
  fill.non_harmful_tokens =
      fill_to_target(non_harmful, fill.non_harmful_target, fill.non_harmful, fill.non_harmful_exhausted);
  return fill;
}

std::pair<int, int> region_bounds(Region region, int m) {
  switch (region) {
    case Region::kBeginning: return {1, m / 3};
    case Region::kMiddle: return {m / 3 + 1, 2 * m / 3};
    case Region::kEnd: return {2 * m / 3 + 1, m};
    case Region::kAll: return {1, m};
  }
  return {1, m};
}

std::vector<LabeledSentence> place_region(std::vector<LabeledSentence> harmful,
                                          std::vector<LabeledSentence> non_harmful, Region region,
                                          Rng& rng) {
  const auto m = static_cast<int>(harmful.size() + non_harmful.size());
  if (m == 0) throw SynthesisError("cannot place an empty sentence list");

  if (region == Region::kAll) {
    std::vector<LabeledSentence> all = std::move(harmful);
    all.insert(all.end(), std::make_move_iterator(non_harmful.begin()),
               std::make_move_iterator(non_harmful.end()));
    rng.shuffle(std::span(all));
    return all;
  }

  const auto [lo, hi] = region_bounds(region, m);
  const int capacity = std::max(0, hi - lo + 1);
  if (static_cast<int>(harmful.size()) > capacity) {
    throw SynthesisError(std::to_string(harmful.size()) + " harmful sentences exceed the " +
                         std::string(to_string(region)) + " third's capacity of " +
                         std::to_string(capacity) + " (m=" + std::to_string(m) + ")");
  }

  // Uniform subset of the third via a partial Fisher-Yates pass.
  std::vector<int> candidates;
  for (int pos = lo; pos <= hi; ++pos) candidates.push_back(pos);
  const auto k = harmful.size();
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  std::vector<bool> is_harmful_slot(static_cast<std::size_t>(m) + 1, false);
  for (std::size_t i = 0; i < k; ++i) is_harmful_slot[static_cast<std::size_t>(candidates[i])] = true;

  rng.shuffle(std::span(harmful));
  rng.shuffle(std::span(non_harmful));

  std::vector<LabeledSentence> ordered;
  ordered.reserve(static_cast<std::size_t>(m));
  std::size_t next_harmful = 0;
  std::size_t next_other = 0;
  for (int pos = 1; pos <= m; ++pos) {
    if (is_harmful_slot[static_cast<std::size_t>(pos)]) {
      ordered.push_back(std::move(harmful[next_harmful++]));
    } else {
      ordered.push_back(std::move(non_harmful[next_other++]));
    }
  }
  return ordered;
}

std::string render_numbered_block(const std::vector<NumberedSentence>& items, bool newline_separated) {
  std::string block;
  for (const auto& item : items) {
    if (!block.empty()) block.push_back(newline_separated ? '\n' : ' ');
    block += std::to_string(item.index);
    block += ". ";
    block += item.sentence.text;
  }
  return block;
}

ConstructedPrompt build_prompt(const SentencePool& pool, const PromptSpec& spec,
                               const InstructionTemplate& tmpl, Rng& rng, const SynthesisOptions& options) {
  if (tmpl.setting != PromptSetting::kLongContext) {
    throw SynthesisError("build_prompt needs a long_context template");
  }
  if (tmpl.category != spec.category) {
    throw SynthesisError("template category " + std::string(to_string(tmpl.category)) +
                         " does not match spec category " + std::string(to_string(spec.category)));
  }

  auto fill = fill_budget(pool, spec, rng, options);
  const int harmful_tokens = fill.harmful_tokens;
  auto ordered = place_region(std::move(fill.harmful), std::move(fill.non_harmful), spec.region, rng);

  ConstructedPrompt prompt;
  prompt.budget_exhausted = fill.harmful_exhausted || fill.non_harmful_exhausted;
  prompt.items.reserve(ordered.size());
  int index = 0;
  for (auto& sentence : ordered) {
    ++index;
    prompt.realized_tokens += sentence.token_count;
    if (sentence.harmful()) prompt.truth_indices.push_back(index);
    prompt.items.push_back({index, std::move(sentence)});
  }
  prompt.realized_harm_ratio =
      prompt.realized_tokens > 0 ? static_cast<double>(harmful_tokens) / prompt.realized_tokens : 0.0;
  prompt.rendered_text = fill_slot(tmpl, render_numbered_block(prompt.items, options.newline_separated));
  if (options.answer_suffix) prompt.rendered_text += "\nAnswer:";
  return prompt;
}

ConstructedPrompt build_prompt(const SentencePool& pool, const PromptSpec& spec,
                               const InstructionTemplate& tmpl, const SynthesisOptions& options) {
  Rng rng(spec.seed);
  return build_prompt(pool, spec, tmpl, rng, options);
}

std::string render_sentence_level(const InstructionTemplate& tmpl, const LabeledSentence& sentence) {
  if (tmpl.setting != PromptSetting::kSentenceLevel) {
    throw SynthesisError("render_sentence_level needs a sentence_level template");
  }
  return fill_slot(tmpl, sentence.text);
}

std::uint64_t derive_trial_seed(std::uint64_t master_seed, std::string_view setting_id,
                                std::uint64_t trial_index) {
  std::string material = "harmscope-trial-seed\x1f" + std::to_string(master_seed) + '\x1f';
  material.append(setting_id);
  material += '\x1f';
  material += std::to_string(trial_index);
  return sha256_u64(material);
}

}  // namespace harmscope
