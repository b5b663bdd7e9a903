#include <doctest.h>

#include "harmscope/corpus.hpp"
#include "harmscope/templates.hpp"
#include "support.hpp"

using namespace harmscope;

TEST_CASE("built-in templates match the golden files byte for byte") {
  for (auto c : {Category::kToxic, Category::kOffensive, Category::kHate}) {
    for (auto s : {PromptSetting::kSentenceLevel, PromptSetting::kLongContext}) {
      const auto stem = template_file_stem(c, s);
      CAPTURE(stem);
      const auto golden = testing::read_file(std::filesystem::path(HARMSCOPE_TEMPLATE_DIR) / (stem + ".txt"));
      REQUIRE(!golden.empty());
      CHECK(builtin_template(c, s).text == golden);
    }
  }
}

TEST_CASE("template phrases") {
  const auto& toxic = builtin_template(Category::kToxic, PromptSetting::kLongContext).text;
  CHECK(toxic.find("Return only a comma-separated list") != std::string::npos);
  CHECK(toxic.find("Answer: 10, 16") != std::string::npos);
  CHECK(builtin_template(Category::kToxic, PromptSetting::kSentenceLevel).text.find("Only answer 'yes' or 'no'") !=
        std::string::npos);
  CHECK(builtin_template(Category::kHate, PromptSetting::kLongContext).text.find("Identify which sentences are hate") !=
        std::string::npos);
}

TEST_CASE("slot validation") {
  CHECK_NOTHROW(make_template(Category::kToxic, PromptSetting::kLongContext, "List: {sentences}"));
  CHECK_NOTHROW(make_template(Category::kToxic, PromptSetting::kSentenceLevel, "Judge: {sentence}"));
  CHECK_THROWS_AS(make_template(Category::kToxic, PromptSetting::kLongContext, "no slot"), TemplateError);
  CHECK_THROWS_AS(make_template(Category::kToxic, PromptSetting::kLongContext, "{sentences} {sentences}"), TemplateError);
  CHECK_THROWS_AS(make_template(Category::kToxic, PromptSetting::kLongContext, "{sentence}"), TemplateError);
  CHECK_THROWS_AS(make_template(Category::kToxic, PromptSetting::kSentenceLevel, "{sentences}"), TemplateError);
  const auto t = make_template(Category::kHate, PromptSetting::kSentenceLevel, "A {sentence} B");
  CHECK(fill_slot(t, "x") == "A x B");
}

TEST_CASE("names and defaults") {
  CHECK(template_file_stem(Category::kHate, PromptSetting::kLongContext) == "hate_long_context");
  CHECK(template_file_stem(Category::kOffensive, PromptSetting::kSentenceLevel) == "offensive_sentence_level");
  CHECK(default_category(Dataset::from_name("ihc")) == Category::kHate);
  CHECK(default_category(Dataset::from_name("offenseval")) == Category::kOffensive);
  CHECK(default_category(Dataset::from_name("jigsaw_toxic")) == Category::kToxic);
  CHECK(!default_category(Dataset::from_name("mine")).has_value());
  CHECK(parse_category("toxic") == Category::kToxic);
  CHECK_THROWS(parse_category("rude"));
}

TEST_CASE("templates load from disk") {
  testing::TempDir dir("tmpl");
  {
    std::ofstream out(dir / "t.txt", std::ios::binary);
    out << "Custom {sentences}";
  }
  const auto t = load_template(dir / "t.txt", Category::kToxic, PromptSetting::kLongContext);
  CHECK(t.text == "Custom {sentences}");
  CHECK_THROWS(load_template(dir / "missing.txt", Category::kToxic, PromptSetting::kLongContext));
}
