#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "harmscope/config.hpp"
#include "harmscope/runner.hpp"
#include "harmscope/synthesis.hpp"
#include "support.hpp"

using namespace harmscope;
using testing::fixed_pool;

namespace {

PromptSpec budget(int p, double r, Region region = Region::kAll, HarmSelection t = HarmSelection::kBoth,
                  std::uint64_t seed = 1) {
  PromptSpec spec;
  spec.mode = SizingMode::kTokenBudget;
  spec.budget_tokens = p;
  spec.harm_ratio = r;
  spec.region = region;
  spec.harm_type = t;
  spec.seed = seed;
  return spec;
}

PromptSpec counts(int s, int n, Region region = Region::kAll, std::uint64_t seed = 1) {
  PromptSpec spec;
  spec.mode = SizingMode::kSentenceCount;
  spec.sentence_count = s;
  spec.harmful_count = n;
  spec.region = region;
  spec.seed = seed;
  return spec;
}

const InstructionTemplate& toxic_long() { return builtin_template(Category::kToxic, PromptSetting::kLongContext); }

}  // namespace

TEST_CASE("budget fill with 30-token sentences") {
  const auto pool = fixed_pool(40, 40, 200, 30);
  Rng rng(7);
  const auto fill = fill_budget(pool, budget(600, 0.25), rng);
  // 150 harmful tokens hold exactly five sentences, the remaining 450 fifteen.
  CHECK(fill.harmful.size() == 5);
  CHECK(fill.non_harmful.size() == 15);
  CHECK(fill.harmful_tokens == 150);
  CHECK(fill.non_harmful_tokens == 450);

  const auto prompt = build_prompt(pool, budget(600, 0.25), toxic_long());
  const WhitespaceTokenCounter counter;
  int retokenized = 0;
  for (const auto& item : prompt.items) retokenized += item.sentence.token_count;
  CHECK(prompt.realized_tokens == retokenized);
  CHECK(prompt.realized_harm_ratio >= 0.20);
  CHECK(prompt.realized_harm_ratio <= 0.30);
}

TEST_CASE("budget fill with varied lengths lands near the nominal ratio on average") {
  const auto pool = testing::synthetic_pool(4000, 0.4, 0.5);
  double sum = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    sum += build_prompt(pool, budget(600, 0.25, Region::kAll, HarmSelection::kBoth, t), toxic_long())
               .realized_harm_ratio;
  }
  const double mean = sum / trials;
  CHECK(mean >= 0.20);
  CHECK(mean <= 0.30);
}

TEST_CASE("fill never exceeds its targets") {
  const auto pool = testing::synthetic_pool(4000, 0.4, 0.5);
  for (int seed = 0; seed < 300; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const int p = 200 + seed * 13;
    const double r = (seed % 11) / 10.0;
    const auto fill = fill_budget(pool, budget(p, r), rng);
    CHECK(fill.harmful_tokens <= p * r + 1e-9);
    CHECK(fill.harmful_tokens + fill.non_harmful_tokens <= p);
  }
}

TEST_CASE("sentence-count mode draws exact counts") {
  const auto pool = fixed_pool(30, 30, 100, 12);
  Rng rng(3);
  const auto fill = fill_budget(pool, counts(20, 10), rng);
  CHECK(fill.harmful.size() == 10);
  CHECK(fill.non_harmful.size() == 10);
}

TEST_CASE("zero ratio yields no harmful sentences") {
  const auto pool = fixed_pool(30, 30, 100, 12);
  const auto prompt = build_prompt(pool, budget(600, 0.0), toxic_long());
  CHECK(prompt.truth_indices.empty());
  CHECK(prompt.realized_harm_ratio == 0.0);
}

TEST_CASE("harm type restricts the harmful stratum") {
  const auto pool = fixed_pool(30, 30, 100, 12);
  for (auto [t, want] : {std::pair{HarmSelection::kExplicit, HarmType::kExplicit},
                         std::pair{HarmSelection::kImplicit, HarmType::kImplicit}}) {
    const auto prompt = build_prompt(pool, budget(600, 0.5, Region::kAll, t), toxic_long());
    CHECK(!prompt.truth_indices.empty());
    for (int i : prompt.truth_indices) CHECK(prompt.items[i - 1].sentence.harm_type == want);
  }
  SynthesisOptions all_explicit;
  all_explicit.explicit_share = 1.0;
  Rng rng(8);
  const auto fill = fill_budget(pool, budget(600, 0.5), rng, all_explicit);
  for (const auto& s : fill.harmful) CHECK(s.harm_type == HarmType::kExplicit);
}

TEST_CASE("exhausted strata") {
  // 4 harmful sentences of 30 tokens = 120 tokens.
  const auto pool = fixed_pool(4, 0, 200, 30);
  Rng rng(1);
  SUBCASE("below 80% of the target is an error") {
    CHECK_THROWS_AS(fill_budget(pool, budget(1000, 0.2), rng), SynthesisError);  // 120 of 200
  }
  SUBCASE("at or above 80% the shortfall is tolerated and flagged") {
    const auto fill = fill_budget(pool, budget(1000, 0.14), rng);  // 120 of 140
    CHECK(fill.harmful.size() == 4);
    CHECK(fill.harmful_exhausted);
    const auto prompt = build_prompt(pool, budget(1000, 0.14), toxic_long());
    CHECK(prompt.budget_exhausted);
  }
  SUBCASE("sentence-count mode needs the full count") {
    CHECK_THROWS(fill_budget(pool, counts(20, 5), rng));
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(budget(0, 0.1).validate(), SynthesisError);
  CHECK_THROWS_AS(budget(100, 1.5).validate(), SynthesisError);
  CHECK_THROWS_AS(budget(100, -0.1).validate(), SynthesisError);
  CHECK_THROWS_AS(counts(50, 100).validate(), SynthesisError);
  CHECK_THROWS_AS(counts(10, 10).validate(), SynthesisError);
  CHECK_THROWS_AS(counts(10, 0).validate(), SynthesisError);
  CHECK_NOTHROW(counts(10, 9).validate());
  CHECK_NOTHROW(budget(1, 1.0).validate());
}

TEST_CASE("region thirds") {
  CHECK(region_bounds(Region::kBeginning, 12) == std::pair{1, 4});
  CHECK(region_bounds(Region::kMiddle, 12) == std::pair{5, 8});
  CHECK(region_bounds(Region::kEnd, 12) == std::pair{9, 12});
  CHECK(region_bounds(Region::kBeginning, 20) == std::pair{1, 6});
  CHECK(region_bounds(Region::kMiddle, 20) == std::pair{7, 13});
  CHECK(region_bounds(Region::kEnd, 20) == std::pair{14, 20});
  CHECK(region_bounds(Region::kAll, 20) == std::pair{1, 20});
  // Floor division leaves the first third empty for m < 3.
  CHECK(region_bounds(Region::kBeginning, 2) == std::pair{1, 0});
}

TEST_CASE("region placement") {
  const auto pool = fixed_pool(10, 10, 40, 10);
  const auto harmful = [&](int n) {
    std::vector<LabeledSentence> out;
    for (int i = 0; i < n; ++i) out.push_back(pool.at(static_cast<std::size_t>(i)));
    return out;
  };
  const auto plain = [&](int n) {
    std::vector<LabeledSentence> out;
    for (int i = 0; i < n; ++i) out.push_back(pool.at(static_cast<std::size_t>(20 + i)));
    return out;
  };

  SUBCASE("middle of twelve") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      const auto order = place_region(harmful(3), plain(9), Region::kMiddle, rng);
      REQUIRE(order.size() == 12);
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i].harmful()) {
          CHECK(i + 1 >= 5);
          CHECK(i + 1 <= 8);
        }
      }
    }
  }
  SUBCASE("end of nine cannot hold four") {
    Rng rng(1);
    CHECK_THROWS_AS(place_region(harmful(4), plain(5), Region::kEnd, rng), SynthesisError);
  }
  SUBCASE("all with nothing harmful is a permutation") {
    Rng rng(1);
    const auto order = place_region({}, plain(15), Region::kAll, rng);
    std::set<std::string> ids;
    for (const auto& s : order) ids.insert(s.id);
    CHECK(ids.size() == 15);
  }
  SUBCASE("harmful positions are uniform within the third") {
    // One harmful sentence in the beginning third of 12: positions 1..4 equally likely.
    std::map<std::size_t, int> freq;
    const int runs = 8000;
    for (int seed = 0; seed < runs; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed));
      const auto order = place_region(harmful(1), plain(11), Region::kBeginning, rng);
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i].harmful()) ++freq[i + 1];
      }
    }
    CHECK(freq.size() == 4);
    const double se = std::sqrt(runs * 0.25 * 0.75);
    for (const auto& [pos, n] : freq) CHECK(std::abs(n - runs * 0.25) < 5 * se);
  }
}

TEST_CASE("constructed prompts") {
  const auto pool = fixed_pool(30, 30, 100, 30);
  const auto spec = budget(600, 0.25, Region::kBeginning, HarmSelection::kBoth, 17);
  const auto prompt = build_prompt(pool, spec, toxic_long());

  SUBCASE("numbering is contiguous and truth matches labels") {
    for (int i = 0; i < prompt.size(); ++i) CHECK(prompt.items[i].index == i + 1);
    std::vector<int> truth;
    for (const auto& item : prompt.items) {
      if (item.sentence.harmful()) truth.push_back(item.index);
    }
    CHECK(truth == prompt.truth_indices);
  }
  SUBCASE("beginning region of twenty") {
    REQUIRE(prompt.size() == 20);
    for (int i : prompt.truth_indices) CHECK(i <= 6);
  }
  SUBCASE("deterministic in the seed") {
    CHECK(build_prompt(pool, spec, toxic_long()).rendered_text == prompt.rendered_text);
    auto other = spec;
    other.seed = 18;
    CHECK(build_prompt(pool, other, toxic_long()).rendered_text != prompt.rendered_text);
  }
  SUBCASE("rendering") {
    CHECK(prompt.rendered_text.rfind(
              "You will see a numbered list of sentences. Identify which sentences are toxic.", 0) == 0);
    const std::string block = "Sentences: 1. " + prompt.items[0].sentence.text + " 2. " + prompt.items[1].sentence.text + " 3. ";
    CHECK(prompt.rendered_text.find(block) != std::string::npos);
    CHECK(prompt.rendered_text.size() > 8);
    CHECK(prompt.rendered_text.substr(prompt.rendered_text.size() - 8) == "\nAnswer:");

    SynthesisOptions lines;
    lines.newline_separated = true;
    lines.answer_suffix = false;
    const auto alt = build_prompt(pool, spec, toxic_long(), lines);
    CHECK(alt.rendered_text.find("1. " + alt.items[0].sentence.text + "\n2. ") != std::string::npos);
    CHECK(alt.rendered_text.find("Answer:", alt.rendered_text.size() - 10) == std::string::npos);
  }
}

TEST_CASE("sentence-level rendering") {
  LabeledSentence s = testing::make_sentence("x", Label::kHarmful, HarmType::kExplicit, 4);
  s.text = "You are an idiot.";
  const auto text = render_sentence_level(builtin_template(Category::kToxic, PromptSetting::kSentenceLevel), s);
  const std::string tail = "Sentence: You are an idiot.";
  CHECK(text.substr(text.size() - tail.size()) == tail);
  // Category mismatch is the caller's business.
  CHECK_NOTHROW(render_sentence_level(builtin_template(Category::kOffensive, PromptSetting::kSentenceLevel), s));
  CHECK(builtin_template(Category::kHate, PromptSetting::kSentenceLevel).text.find("targets a group or a person") !=
        std::string::npos);
  CHECK_THROWS_AS(render_sentence_level(toxic_long(), s), SynthesisError);
}

TEST_CASE("trial seeds do not collide over the default prevalence grid") {
  ExperimentConfig config;
  config.datasets.push_back({Dataset::from_name("ihc"), {}, Category::kHate});
  const auto settings = expand_grid(config, RunMode::kPrevalence, {});
  REQUIRE(settings.size() == 192);
  std::set<std::uint64_t> seeds;
  std::size_t trials = 0;
  for (const auto& s : settings) {
    for (int t = 0; t < s.trials; ++t) {
      seeds.insert(derive_trial_seed(config.master_seed, s.setting_id, static_cast<std::uint64_t>(t)));
      ++trials;
    }
  }
  CHECK(trials == 24576);
  CHECK(seeds.size() == trials);
  CHECK(derive_trial_seed(1, "abc", 0) == derive_trial_seed(1, "abc", 0));
  CHECK(derive_trial_seed(1, "abc", 0) != derive_trial_seed(2, "abc", 0));
}
