#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "harmscope/corpus.hpp"
#include "harmscope/rng.hpp"
#include "support.hpp"

using namespace harmscope;
using testing::fixed_pool;
using testing::make_sentence;

namespace {

/// JSONL with the given label mix, interleaved so the loader sees every kind early.
std::string corpus_text(int n_explicit, int n_implicit, int n_non) {
  std::string out;
  int e = 0, i = 0, n = 0, line = 0;
  while (e < n_explicit || i < n_implicit || n < n_non) {
    ++line;
    if (e < n_explicit && line % 3 == 0) {
      out += R"({"text":"explicit sentence )" + std::to_string(e++) + R"(","label":"harmful","harm_type":"explicit"})";
    } else if (i < n_implicit && line % 3 == 1) {
      out += R"({"text":"implicit sentence )" + std::to_string(i++) + R"(","label":"harmful","harm_type":"implicit"})";
    } else if (n < n_non) {
      out += R"({"text":"plain sentence )" + std::to_string(n++) + R"(","label":"non_harmful"})";
    } else if (e < n_explicit) {
      out += R"({"text":"explicit sentence )" + std::to_string(e++) + R"(","label":"harmful","harm_type":"explicit"})";
    } else {
      out += R"({"text":"implicit sentence )" + std::to_string(i++) + R"(","label":"harmful","harm_type":"implicit"})";
    }
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("IHC-sized export reproduces the published label shares") {
  // 21,480 sentences, 38.12% hateful, 86.56% of those implicit.
  const int harmful = 8188;
  const int implicit = 7088;
  const auto pool = parse_corpus(corpus_text(harmful - implicit, implicit, 21480 - harmful), Dataset::from_name("ihc"),
                                 WhitespaceTokenCounter());
  const auto& st = pool.stats();
  CHECK(st.total == 21480);
  CHECK(st.harmful + st.non_harmful == st.total);
  CHECK(std::abs(st.harmful_fraction - 0.3812) < 1e-4);
  CHECK(std::abs(st.implicit_fraction_of_harmful - 0.8656) < 1e-4);
  CHECK(pool.stratum(Stratum::kHarmfulImplicit).size() == static_cast<std::size_t>(implicit));
}

TEST_CASE("Jigsaw-sized pool has 10.78% toxic") {
  std::vector<LabeledSentence> sentences;
  for (int i = 0; i < 119675; ++i) {
    const bool toxic = i < 12901;
    sentences.push_back(make_sentence("j" + std::to_string(i), toxic ? Label::kHarmful : Label::kNonHarmful,
                                      toxic ? HarmType::kExplicit : HarmType::kNotApplicable, 20));
  }
  const auto st = corpus_stats(sentences);
  CHECK(std::abs(st.harmful_fraction - 0.1078) < 1e-4);
}

TEST_CASE("small pools") {
  SUBCASE("one non-harmful record") {
    const auto pool = parse_corpus(R"({"text":"fine","label":"non_harmful"})", Dataset::from_name("ihc"),
                                   WhitespaceTokenCounter());
    CHECK(pool.stratum(Stratum::kHarmfulExplicit).size() == 0);
    CHECK(pool.stratum(Stratum::kHarmfulImplicit).size() == 0);
    CHECK(pool.stratum(Stratum::kNonHarmful).size() == 1);
  }
  SUBCASE("two sentences, one harmful") {
    CHECK(fixed_pool(1, 0, 1, 5).stats().harmful_fraction == 0.5);
  }
  SUBCASE("hundred sentences of 30 tokens") {
    const auto st = fixed_pool(20, 30, 50, 30).stats();
    CHECK(st.mean_token_count == 30.0);
    CHECK(st.max_token_count == 30);
  }
}

TEST_CASE("loader rejects invalid records with their line number") {
  const WhitespaceTokenCounter counter;
  const auto ihc = Dataset::from_name("ihc");
  const auto rejects = [&](const std::string& text, const std::string& needle) {
    try {
      parse_corpus(text, ihc, counter);
    } catch (const CorpusError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(rejects("{\"text\":\"a\",\"label\":\"non_harmful\"}\n{\"text\":\"b\",\"label\":\"harmful\"}\n", "line 2"));
  CHECK(rejects("{\"text\":\"a\",\"label\":\"non_harmful\",\"harm_type\":\"explicit\"}\n", "line 1"));
  CHECK(rejects("{\"text\":\"a\",\"label\":\"non_harmful\"}\n{not json\n", "line 2"));
  CHECK(rejects("{\"text\":\"   \",\"label\":\"non_harmful\"}\n", "line 1"));
  CHECK(rejects("{\"text\":\"a\",\"label\":\"maybe\"}\n", "line 1"));
  CHECK(rejects("{\"id\":\"x\",\"text\":\"a\",\"label\":\"non_harmful\"}\n{\"id\":\"x\",\"text\":\"b\",\"label\":\"non_harmful\"}\n", "x"));
  CHECK_THROWS_AS(parse_corpus("\n\n", ihc, counter), CorpusError);
}

TEST_CASE("loader assigns ids from the line number and computes token counts") {
  const auto pool = parse_corpus("{\"text\":\"one two three\",\"label\":\"non_harmful\"}\n\n"
                                 "{\"text\":\"four\",\"label\":\"non_harmful\",\"token_count\":9}\n",
                                 Dataset::from_name("ihc"), WhitespaceTokenCounter(1.0));
  REQUIRE(pool.size() == 2);
  CHECK(pool.at(0).id == "ihc:1");
  CHECK(pool.at(1).id == "ihc:3");
  CHECK(pool.at(0).token_count == 3);
  CHECK(pool.at(1).token_count == 9);
}

TEST_CASE("pool cache round-trips") {
  testing::TempDir dir("cache");
  const auto pool = testing::synthetic_pool(300);
  write_pool_cache(pool, dir / "cache.jsonl");
  const auto back = load_corpus(dir / "cache.jsonl", Dataset::from_name("ihc"), WhitespaceTokenCounter(5.0));
  REQUIRE(back.size() == pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CHECK(back.at(i).id == pool.at(i).id);
    CHECK(back.at(i).text == pool.at(i).text);
    CHECK(back.at(i).label == pool.at(i).label);
    CHECK(back.at(i).harm_type == pool.at(i).harm_type);
    CHECK(back.at(i).token_count == pool.at(i).token_count);
  }
}

TEST_CASE("strata partition the pool") {
  const auto pool = testing::synthetic_pool(2000, 0.35, 0.7);
  std::set<std::size_t> seen;
  std::size_t members = 0;
  for (auto s : {Stratum::kHarmfulExplicit, Stratum::kHarmfulImplicit, Stratum::kNonHarmful}) {
    for (auto pos : pool.stratum(s)) {
      seen.insert(pos);
      ++members;
    }
  }
  CHECK(members == pool.size());
  CHECK(seen.size() == pool.size());
  CHECK(pool.stratum(Stratum::kHarmfulAny).size() == pool.stats().harmful);
  for (auto pos : pool.stratum(Stratum::kHarmfulImplicit)) CHECK(pool.at(pos).harm_type == HarmType::kImplicit);
  for (std::size_t i = 0; i < pool.size(); ++i) CHECK(pool.find(pool.at(i).id) == i);
}

TEST_CASE("stratum sampling") {
  const auto pool = fixed_pool(5, 7, 20, 10);
  SUBCASE("zero draws") {
    Rng rng(1);
    CHECK(sample_stratum(pool, Stratum::kHarmfulAny, 0, rng).empty());
  }
  SUBCASE("whole stratum is a permutation") {
    Rng rng(2);
    const auto got = sample_stratum(pool, Stratum::kHarmfulAny, 12, rng);
    std::set<std::string> ids;
    for (const auto& s : got) ids.insert(s.id);
    CHECK(ids.size() == 12);
    for (const auto& s : got) CHECK(s.harmful());
  }
  SUBCASE("same seed, same sequence") {
    Rng a(99), b(99);
    const auto x = sample_stratum(pool, Stratum::kNonHarmful, 9, a);
    const auto y = sample_stratum(pool, Stratum::kNonHarmful, 9, b);
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].id == y[i].id);
  }
  SUBCASE("too few members") {
    Rng rng(3);
    try {
      sample_stratum(pool, Stratum::kHarmfulExplicit, 8, rng);
      FAIL("expected SamplingError");
    } catch (const SamplingError& e) {
      CHECK(e.stratum() == Stratum::kHarmfulExplicit);
      CHECK(e.shortfall() == 3);
    }
  }
}

TEST_CASE("single draws are uniform over the stratum") {
  const auto pool = fixed_pool(0, 0, 20, 10);
  const int seeds = 10000;
  std::map<std::string, int> freq;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    ++freq[sample_stratum(pool, Stratum::kNonHarmful, 1, rng).front().id];
  }
  const double p = 1.0 / 20;
  const double se = std::sqrt(seeds * p * (1 - p));
  CHECK(freq.size() == 20);
  for (const auto& [id, count] : freq) CHECK(std::abs(count - seeds * p) < 5 * se);
}

TEST_CASE("Rng helpers stay in range") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    CHECK(rng.below(7) < 7);
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}
