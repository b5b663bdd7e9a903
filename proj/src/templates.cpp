#include "harmscope/templates.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace harmscope {

std::string_view to_string(Category category) {
  switch (category) {
    case Category::kToxic: return "toxic";
    case Category::kOffensive: return "offensive";
    case Category::kHate: return "hate";
  }
  return "toxic";
}

std::string_view to_string(PromptSetting setting) {
  return setting == PromptSetting::kSentenceLevel ? "sentence_level" : "long_context";
}

Category parse_category(std::string_view text) {
  if (text == "toxic") return Category::kToxic;
  if (text == "offensive") return Category::kOffensive;
  if (text == "hate") return Category::kHate;
  throw TemplateError("unknown harm category '" + std::string(text) + "'");
}

PromptSetting parse_prompt_setting(std::string_view text) {
  if (text == "sentence_level") return PromptSetting::kSentenceLevel;
  if (text == "long_context") return PromptSetting::kLongContext;
  throw TemplateError("unknown prompt setting '" + std::string(text) + "'");
}

std::optional<Category> default_category(const Dataset& dataset) {
  switch (dataset.kind) {
    case Dataset::Kind::kIhc: return Category::kHate;
    case Dataset::Kind::kOffensEval: return Category::kOffensive;
    case Dataset::Kind::kJigsawToxic: return Category::kToxic;
    case Dataset::Kind::kCustom: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

constexpr std::string_view kToxicSentence =
    R"(Return yes if the sentence is toxic, otherwise no. Definition: Toxic sentence is any rude, disrespectful, hostile, or unreasonable text that is likely to make others leave a conversation.
Rules: If unsure, output no. Neutral statements, factual content, or polite disagreements are not toxic. Only answer 'yes' or 'no'. Nothing else.
Examples: Sentence: You are an idiot. Answer: yes;
Sentence: I disagree with your comment. Answer: no;
Sentence: Muslims don't belong here. Answer: yes;
Sentence: I hate this weather. Answer: no;
Sentence: {sentence})";

constexpr std::string_view kToxicLong =
    R"(You will see a numbered list of sentences. Identify which sentences are toxic. Definition: Toxic sentence is any rude, disrespectful, hostile, or unreasonable text that is likely to make others leave a conversation.
Rules: If unsure, output nothing. Neutral statements, factual content, or polite disagreements are not toxic. Return only a comma-separated list of their numbers in ascending order.
Example:
Sentences: 7. I hate this weather. 10. Muslims don't belong here. 16. You are stupid. 32. I disagree with your comment.
Answer: 10, 16
Sentences: {sentences})";

constexpr std::string_view kOffensiveSentence =
    R"(Return yes if the sentence is offensive language, otherwise no. Definition: Offensive language is any form of unacceptable language—this includes profanity or a targeted offense, which can be either direct or veiled. Rules: If unsure, output no. Neutral statements, or criticisms stated politely, are not offensive. Only answer 'yes' or 'no'. Nothing else.
Examples:
Sentence: You are stupid. Answer: yes
Sentence: Muslims don't belong here. Answer: yes
Sentence: I hate this weather. Answer: no
Sentence: Leave me alone. Answer: no
Sentence: {sentence})";

constexpr std::string_view kOffensiveLong =
    R"(You will see a numbered list of sentences. Identify which sentences are offensive language. Definition: Offensive language is any form of unacceptable language—this includes profanity or a targeted offense, which can be either direct or veiled. Rules: If unsure, output nothing.
Neutral statements, or criticisms stated politely, are not offensive. Return only a comma-separated list of their numbers in ascending order.
Example:
Sentences:
7. I hate this weather. 10. Muslims don't belong here. 16. You are stupid. 32. Leave me alone.
Answer: 10, 16
Sentences: {sentences})";

constexpr std::string_view kHateSentence =
    R"(Return yes if the sentence is hate speech, otherwise no. Definition: Hate speech is abuse that targets a group or a person for belonging to that group (e.g., race, ethnicity, religion, nationality, gender, sexual orientation, disability).
Rules: If unsure, output no. Toxic insults without targeting a specific group are not hate speech. Only answer 'yes' or 'no'. Nothing else.
Examples:
Sentence: You are stupid. Answer: no
Sentence: Muslims don't belong here. Answer: yes
Sentence: I hate this weather. Answer: no
Sentence: They must stay in the middle east where they belong. Answer: yes
Sentence: {sentence})";

constexpr std::string_view kHateLong =
    R"(You will see a numbered list of sentences. Identify which sentences are hate speech. Definition: Hate speech is abuse that targets a group or a person for belonging to that group (e.g., race, ethnicity, religion, nationality, gender, sexual orientation, disability).
Rules: If unsure, output nothing. Toxic insults without targeting a specific group are not hate speech. Return only a comma-separated list of their numbers in ascending order. No words.
Example:
Sentences:
7. I hate this weather. 10. Muslims don't belong here. 16. You are stupid. 32. They must stay in the middle east where they belong.
Answer: 10, 32
Sentences: {sentences})";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + 1)) {
    ++count;
  }
  return count;
}

std::string_view slot_for(PromptSetting setting) {
  return setting == PromptSetting::kSentenceLevel ? kSentenceSlot : kSentencesSlot;
}

}  // namespace

InstructionTemplate make_template(Category category, PromptSetting setting, std::string text) {
  const auto slot = slot_for(setting);
  const auto n = count_occurrences(text, slot);
  if (n != 1) {
    throw TemplateError(std::string(to_string(setting)) + " template must contain exactly one " +
                        std::string(slot) + " slot, found " + std::to_string(n));
  }
  return {category, setting, std::move(text)};
}

const InstructionTemplate& builtin_template(Category category, PromptSetting setting) {
  static const std::array<InstructionTemplate, 6> kBuiltins = {
      make_template(Category::kToxic, PromptSetting::kSentenceLevel, std::string(kToxicSentence)),
      make_template(Category::kToxic, PromptSetting::kLongContext, std::string(kToxicLong)),
      make_template(Category::kOffensive, PromptSetting::kSentenceLevel, std::string(kOffensiveSentence)),
      make_template(Category::kOffensive, PromptSetting::kLongContext, std::string(kOffensiveLong)),
      make_template(Category::kHate, PromptSetting::kSentenceLevel, std::string(kHateSentence)),
      make_template(Category::kHate, PromptSetting::kLongContext, std::string(kHateLong)),
  };
  return kBuiltins[static_cast<std::size_t>(category) * 2 +
                   (setting == PromptSetting::kLongContext ? 1 : 0)];
}

InstructionTemplate load_template(const std::filesystem::path& path, Category category,
                                  PromptSetting setting) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TemplateError("cannot open template file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return make_template(category, setting, buffer.str());
}

std::string template_file_stem(Category category, PromptSetting setting) {
  return std::string(to_string(category)) + "_" + std::string(to_string(setting));
}

std::string fill_slot(const InstructionTemplate& tmpl, std::string_view replacement) {
  const auto slot = slot_for(tmpl.setting);
  const auto pos = tmpl.text.find(slot);
  std::string out;
  out.reserve(tmpl.text.size() + replacement.size());
  out.append(tmpl.text, 0, pos);
  out.append(replacement);
  out.append(tmpl.text, pos + slot.size());
  return out;
}

}  // namespace harmscope
