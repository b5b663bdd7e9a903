#include "harmscope/mock_detector.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "harmscope/digest.hpp"
#include "harmscope/parse.hpp"

namespace harmscope {

namespace {

using Kind = MockDetectorConfig::Kind;

constexpr std::pair<Kind, std::string_view> kKindNames[] = {
    {Kind::kOracle, "oracle"},
    {Kind::kFlagAll, "flag_all"},
    {Kind::kFlagNone, "flag_none"},
    {Kind::kNoisy, "noisy"},
    {Kind::kPositionalDecay, "positional_decay"},
    {Kind::kPrevalencePrior, "prevalence_prior"},
    {Kind::kImplicitPenalty, "implicit_penalty"},
};

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string("mock parameter ") + name + " must lie in [0, 1]");
  }
}

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw std::invalid_argument("mock parameter " + std::string(key) + " is not a number: '" +
                                std::string(value) + "'");
  }
  return out;
}

Rng prompt_rng(const MockDetectorConfig& config, std::string_view content) {
  std::string material = "harmscope-mock\x1f" + std::to_string(config.seed) + '\x1f';
  material.append(content);
  return Rng(sha256_u64(material));
}

}  // namespace

std::string_view to_string(MockDetectorConfig::Kind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "oracle";
}

void MockDetectorConfig::validate() const {
  check_probability(flip_fp, "fp");
  check_probability(flip_fn, "fn");
  check_probability(base_recall, "base");
  check_probability(target_ppv, "ppv");
  check_probability(delta_recall, "delta");
  if (!std::isfinite(decay_per_position)) throw std::invalid_argument("mock parameter decay must be finite");
}

MockDetectorConfig MockDetectorConfig::parse(std::string_view text) {
  MockDetectorConfig config;
  const auto colon = text.find(':');
  const auto kind_name = text.substr(0, colon);
  bool known = false;
  for (const auto& [k, name] : kKindNames) {
    if (name == kind_name) {
      config.kind = k;
      known = true;
    }
  }
  if (!known) throw std::invalid_argument("unknown mock detector kind '" + std::string(kind_name) + "'");

  if (colon != std::string_view::npos) {
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) {
        throw std::invalid_argument("mock parameter '" + std::string(item) + "' is not key=value");
      }
      const auto key = item.substr(0, eq);
      const auto value = item.substr(eq + 1);
      if (key == "seed") {
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
        if (ec != std::errc{} || ptr != value.data() + value.size()) {
          throw std::invalid_argument("mock seed is not an unsigned integer");
        }
        config.seed = seed;
      } else if (key == "fp") {
        config.flip_fp = parse_double(key, value);
      } else if (key == "fn") {
        config.flip_fn = parse_double(key, value);
      } else if (key == "base") {
        config.base_recall = parse_double(key, value);
      } else if (key == "decay") {
        config.decay_per_position = parse_double(key, value);
      } else if (key == "ppv") {
        config.target_ppv = parse_double(key, value);
      } else if (key == "delta") {
        config.delta_recall = parse_double(key, value);
      } else {
        throw std::invalid_argument("unknown mock parameter '" + std::string(key) + "'");
      }
    }
  }
  config.validate();
  return config;
}

std::string MockDetectorConfig::describe() const {
  std::string out(to_string(kind));
  std::vector<std::string> params;
  switch (kind) {
    case Kind::kNoisy:
      params = {"fp=" + format_number(flip_fp), "fn=" + format_number(flip_fn)};
      break;
    case Kind::kPositionalDecay:
      params = {"base=" + format_number(base_recall), "decay=" + format_number(decay_per_position)};
      break;
    case Kind::kPrevalencePrior:
      params = {"ppv=" + format_number(target_ppv)};
      break;
    case Kind::kImplicitPenalty:
      params = {"delta=" + format_number(delta_recall)};
      break;
    default:
      break;
  }
  if (seed != 0) params.push_back("seed=" + std::to_string(seed));
  for (std::size_t i = 0; i < params.size(); ++i) out += (i == 0 ? ":" : ",") + params[i];
  return out;
}

std::vector<int> mock_flagged_indices(const MockDetectorConfig& config, const ConstructedPrompt& prompt) {
  const int m = prompt.size();
  std::vector<bool> truth(static_cast<std::size_t>(m) + 1, false);
  for (int i : prompt.truth_indices) truth[static_cast<std::size_t>(i)] = true;

  std::vector<int> flagged;
  auto rng = prompt_rng(config, prompt.rendered_text);
  switch (config.kind) {
    case Kind::kOracle:
      flagged = prompt.truth_indices;
      break;
    case Kind::kFlagAll:
      for (int i = 1; i <= m; ++i) flagged.push_back(i);
      break;
    case Kind::kFlagNone:
      break;
    case Kind::kNoisy:
      for (int i = 1; i <= m; ++i) {
        const bool keep = truth[static_cast<std::size_t>(i)] ? !rng.bernoulli(config.flip_fn)
                                                             : rng.bernoulli(config.flip_fp);
        if (keep) flagged.push_back(i);
      }
      break;
    case Kind::kPositionalDecay:
      for (int i : prompt.truth_indices) {
        const double p = std::clamp(config.base_recall - config.decay_per_position * (i - 1), 0.0, 1.0);
        if (rng.bernoulli(p)) flagged.push_back(i);
      }
      break;
    case Kind::kPrevalencePrior: {
      // Truth indices first, then the rest, each group in random order.
      std::vector<int> hits;
      std::vector<int> others;
      for (int i = 1; i <= m; ++i) (truth[static_cast<std::size_t>(i)] ? hits : others).push_back(i);
      rng.shuffle(std::span(hits));
      rng.shuffle(std::span(others));
      hits.insert(hits.end(), others.begin(), others.end());
      const auto k = static_cast<std::size_t>(std::floor(config.target_ppv * m));
      flagged.assign(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(std::min(k, hits.size())));
      std::sort(flagged.begin(), flagged.end());
      break;
    }
    case Kind::kImplicitPenalty:
      for (int i : prompt.truth_indices) {
        const auto& s = prompt.items[static_cast<std::size_t>(i - 1)].sentence;
        const double p = s.harm_type == HarmType::kImplicit ? 1.0 - config.delta_recall : 1.0;
        if (rng.bernoulli(p)) flagged.push_back(i);
      }
      break;
  }
  return flagged;
}

std::string mock_detect(const MockDetectorConfig& config, const ConstructedPrompt& prompt) {
  return render_index_list(mock_flagged_indices(config, prompt));
}

std::string mock_detect_sentence(const MockDetectorConfig& config, const LabeledSentence& sentence) {
  ConstructedPrompt single;
  single.items.push_back({1, sentence});
  if (sentence.harmful()) single.truth_indices.push_back(1);
  single.realized_tokens = sentence.token_count;
  single.realized_harm_ratio = sentence.harmful() ? 1.0 : 0.0;
  single.rendered_text = sentence.id + '\x1f' + sentence.text;
  return mock_flagged_indices(config, single).empty() ? "no" : "yes";
}

MockDetector::MockDetector(MockDetectorConfig config) : config_(config) { config_.validate(); }

CompletionResponse MockDetector::run(const DetectionTask& task) {
  CompletionResponse response;
  if (task.prompt != nullptr) {
    response.text = mock_detect(config_, *task.prompt);
  } else if (task.sentence != nullptr) {
    response.text = mock_detect_sentence(config_, *task.sentence);
  } else {
    response.status = TransportStatus::failed("mock detector needs a prompt or a sentence");
    return response;
  }
  response.status = TransportStatus::ok();
  return response;
}

}  // namespace harmscope
