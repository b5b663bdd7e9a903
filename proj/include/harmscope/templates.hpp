#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "harmscope/corpus.hpp"

namespace harmscope {

enum class Category { kToxic, kOffensive, kHate };
enum class PromptSetting { kSentenceLevel, kLongContext };

std::string_view to_string(Category category);
std::string_view to_string(PromptSetting setting);
Category parse_category(std::string_view text);
PromptSetting parse_prompt_setting(std::string_view text);

/// Category a built-in dataset was annotated for; nullopt for custom datasets.
std::optional<Category> default_category(const Dataset& dataset);

inline constexpr std::string_view kSentenceSlot = "{sentence}";
inline constexpr std::string_view kSentencesSlot = "{sentences}";

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instruction text with exactly one slot: {sentence} for sentence-level
/// prompts, {sentences} for the numbered block of long-context prompts.
struct InstructionTemplate {
  Category category = Category::kToxic;
  PromptSetting setting = PromptSetting::kLongContext;
  std::string text;
};

const InstructionTemplate& builtin_template(Category category, PromptSetting setting);

/// Validates that text carries exactly one slot of the kind the setting needs.
InstructionTemplate make_template(Category category, PromptSetting setting, std::string text);

InstructionTemplate load_template(const std::filesystem::path& path, Category category,
                                  PromptSetting setting);

/// Golden-file stem for a (category, setting) pair, e.g. "hate_long_context".
std::string template_file_stem(Category category, PromptSetting setting);

/// Replaces the single slot with replacement.
std::string fill_slot(const InstructionTemplate& tmpl, std::string_view replacement);

}  // namespace harmscope
