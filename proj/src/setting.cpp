#include "harmscope/setting.hpp"

#include <charconv>
#include <stdexcept>

#include "harmscope/digest.hpp"

namespace harmscope {

using nlohmann::json;

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kPrevalence: return "prevalence";
    case RunMode::kDilution: return "dilution";
    case RunMode::kRegion: return "region";
    case RunMode::kType: return "type";
    case RunMode::kSentenceLevel: return "sentence_level";
    case RunMode::kSentenceLevelBalanced: return "sentence_level_balanced";
  }
  return "prevalence";
}

RunMode parse_run_mode(std::string_view text) {
  if (text == "prevalence") return RunMode::kPrevalence;
  if (text == "dilution") return RunMode::kDilution;
  if (text == "region") return RunMode::kRegion;
  if (text == "type") return RunMode::kType;
  if (text == "sentence_level" || text == "sentence-level") return RunMode::kSentenceLevel;
  if (text == "sentence_level_balanced" || text == "sentence-level-balanced") {
    return RunMode::kSentenceLevelBalanced;
  }
  throw std::invalid_argument("unknown run mode '" + std::string(text) + "'");
}

bool is_long_context(RunMode mode) {
  return mode != RunMode::kSentenceLevel && mode != RunMode::kSentenceLevelBalanced;
}

std::string format_ratio(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

std::string Setting::canonical_axes() const {
  std::string out = "mode=" + std::string(to_string(mode)) + ";dataset=" + dataset.name() +
                    ";model=" + model + ";category=" + std::string(to_string(category));
  if (spec) {
    if (spec->mode == SizingMode::kTokenBudget) {
      out += ";p=" + std::to_string(spec->budget_tokens) + ";r=" + format_ratio(spec->harm_ratio);
    } else {
      out += ";s=" + std::to_string(spec->sentence_count) + ";n=" + std::to_string(spec->harmful_count);
    }
    out += ";region=" + std::string(to_string(spec->region)) +
           ";harm_type=" + std::string(to_string(spec->harm_type));
  }
  if (balance_seed) out += ";seed=" + std::to_string(*balance_seed);
  return out;
}

std::string make_setting_id(const Setting& setting) {
  return sha256_hex(setting.canonical_axes()).substr(0, 16);
}

json Setting::axes_json() const {
  json axes = {{"mode", to_string(mode)},
               {"dataset", dataset.name()},
               {"model", model},
               {"category", to_string(category)}};
  if (spec) {
    if (spec->mode == SizingMode::kTokenBudget) {
      axes["p"] = spec->budget_tokens;
      axes["r"] = spec->harm_ratio;
    } else {
      axes["s"] = spec->sentence_count;
      axes["n"] = spec->harmful_count;
    }
    axes["region"] = to_string(spec->region);
    axes["harm_type"] = to_string(spec->harm_type);
  }
  if (balance_seed) axes["seed"] = *balance_seed;
  return axes;
}

Setting Setting::from_axes_json(const json& axes) {
  Setting s;
  s.mode = parse_run_mode(axes.at("mode").get<std::string>());
  s.dataset = Dataset::from_name(axes.at("dataset").get<std::string>());
  s.model = axes.at("model").get<std::string>();
  s.category = parse_category(axes.at("category").get<std::string>());
  s.trials = 0;
  if (is_long_context(s.mode)) {
    PromptSpec spec;
    spec.category = s.category;
    if (axes.contains("p")) {
      spec.mode = SizingMode::kTokenBudget;
      spec.budget_tokens = axes.at("p").get<int>();
      spec.harm_ratio = axes.at("r").get<double>();
    } else {
      spec.mode = SizingMode::kSentenceCount;
      spec.sentence_count = axes.at("s").get<int>();
      spec.harmful_count = axes.at("n").get<int>();
    }
    spec.region = parse_region(axes.at("region").get<std::string>());
    spec.harm_type = parse_harm_selection(axes.at("harm_type").get<std::string>());
    s.spec = spec;
  }
  if (axes.contains("seed")) s.balance_seed = axes.at("seed").get<std::uint64_t>();
  s.setting_id = make_setting_id(s);
  return s;
}

}  // namespace harmscope
