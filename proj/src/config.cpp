#include "harmscope/config.hpp"

#include <fstream>
#include <stdexcept>

namespace harmscope {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return (path.is_absolute() || base.empty()) ? path : base / path;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const json& arr, Parse parse) {
  std::vector<T> out;
  for (const auto& item : arr) out.push_back(parse(item));
  return out;
}

Region region_of(const json& j) { return parse_region(j.get<std::string>()); }
HarmSelection harm_of(const json& j) { return parse_harm_selection(j.get<std::string>()); }

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    c.master_seed = doc.value("master_seed", kDefaultMasterSeed);
    c.store_path = resolve(base_dir, doc.value("store", std::string("runs/store.jsonl")));
    c.concurrency = doc.value("concurrency", 1);
    c.trials = doc.value("trials", kDefaultTrials);
    if (c.concurrency < 1) throw std::invalid_argument("concurrency must be >= 1");
    if (c.trials < 1) throw std::invalid_argument("trials must be >= 1");

    const json datasets = doc.value("datasets", json::array());
    for (const auto& d : datasets) {
      DatasetConfig dc;
      dc.dataset = Dataset::from_name(d.at("name").get<std::string>());
      dc.path = resolve(base_dir, d.at("path").get<std::string>());
      if (d.contains("category")) {
        dc.category = parse_category(d.at("category").get<std::string>());
      } else if (auto cat = default_category(dc.dataset)) {
        dc.category = *cat;
      } else {
        throw std::invalid_argument("custom dataset '" + dc.dataset.name() + "' needs a category");
      }
      c.datasets.push_back(std::move(dc));
    }

    if (doc.contains("backend")) {
      const auto& b = doc.at("backend");
      c.backend.kind = b.value("kind", c.backend.kind);
      c.backend.endpoint = b.value("endpoint", std::string{});
      c.backend.model = b.value("model", std::string{});
      c.backend.context_window = b.value("context_window", c.backend.context_window);
      c.backend.max_inflight = b.value("max_inflight", c.backend.max_inflight);
      if (b.contains("api_key_file")) c.backend.api_key_file = resolve(base_dir, b.at("api_key_file").get<std::string>());
      if (b.contains("retry")) {
        const auto& r = b.at("retry");
        c.backend.retry.max_attempts = r.value("max_attempts", c.backend.retry.max_attempts);
        c.backend.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", 1000));
        c.backend.retry.max_delay = std::chrono::milliseconds(r.value("max_delay_ms", 60000));
        c.backend.retry.jitter = r.value("jitter", true);
      }
    }

    if (doc.contains("tokenizer")) c.token_multiplier = doc.at("tokenizer").value("multiplier", c.token_multiplier);

    if (doc.contains("synthesis")) {
      const auto& s = doc.at("synthesis");
      c.synthesis.newline_separated = s.value("separator", std::string("space")) == "newline";
      c.synthesis.answer_suffix = s.value("answer_suffix", true);
      if (s.contains("explicit_share") && !s.at("explicit_share").is_null()) {
        c.synthesis.explicit_share = s.at("explicit_share").get<double>();
      }
    }

    const json modes = doc.value("modes", json::object());
    if (modes.contains("prevalence")) {
      const auto& m = modes.at("prevalence");
      if (m.contains("p")) c.prevalence.budgets = m.at("p").get<std::vector<int>>();
      if (m.contains("r")) c.prevalence.ratios = m.at("r").get<std::vector<double>>();
      if (m.contains("h")) c.prevalence.regions = parse_list<Region>(m.at("h"), region_of);
      if (m.contains("t")) c.prevalence.harm_types = parse_list<HarmSelection>(m.at("t"), harm_of);
    }
    if (modes.contains("dilution")) {
      const auto& m = modes.at("dilution");
      if (m.contains("s")) c.dilution.sentence_counts = m.at("s").get<std::vector<int>>();
      if (m.contains("n")) c.dilution.harmful_counts = m.at("n").get<std::vector<int>>();
      if (m.contains("pairs")) {
        for (const auto& pair : m.at("pairs")) c.dilution.pairs.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
      }
    }
    if (modes.contains("region")) {
      const auto& m = modes.at("region");
      c.region.budget = m.value("p", c.region.budget);
      c.region.ratio = m.value("r", c.region.ratio);
      if (m.contains("t")) c.region.harm_type = harm_of(m.at("t"));
      if (m.contains("h")) c.region.regions = parse_list<Region>(m.at("h"), region_of);
    }
    if (modes.contains("type")) {
      const auto& m = modes.at("type");
      c.type.budget = m.value("p", c.type.budget);
      c.type.ratio = m.value("r", c.type.ratio);
      if (m.contains("h")) c.type.region = region_of(m.at("h"));
      if (m.contains("t")) c.type.harm_types = parse_list<HarmSelection>(m.at("t"), harm_of);
    }
    if (modes.contains("sentence_level_balanced")) {
      const auto& m = modes.at("sentence_level_balanced");
      if (m.contains("seeds")) c.balanced.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    }

    const json templates = doc.value("templates", json::object());
    for (const auto& [stem, path] : templates.items()) {
      c.template_overrides[stem] = resolve(base_dir, path.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return ExperimentConfig::from_json(doc, path.parent_path());
}

}  // namespace harmscope
