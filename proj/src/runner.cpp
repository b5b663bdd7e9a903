#include "harmscope/runner.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "harmscope/digest.hpp"
#include "harmscope/mock_detector.hpp"
#include "harmscope/openai_client.hpp"
#include "harmscope/parse.hpp"
#include "harmscope/synthesis.hpp"

namespace harmscope {

TemplateSet::TemplateSet(const std::map<std::string, std::filesystem::path>& overrides) {
  for (auto category : {Category::kToxic, Category::kOffensive, Category::kHate}) {
    for (auto setting : {PromptSetting::kSentenceLevel, PromptSetting::kLongContext}) {
      if (auto it = overrides.find(template_file_stem(category, setting)); it != overrides.end()) {
        set(load_template(it->second, category, setting));
      }
    }
  }
  for (const auto& [stem, path] : overrides) {
    bool known = false;
    for (const auto& [key, tmpl] : overrides_) known = known || template_file_stem(key.first, key.second) == stem;
    if (!known) throw TemplateError("unknown template key '" + stem + "'");
  }
}

const InstructionTemplate& TemplateSet::get(Category category, PromptSetting setting) const {
  if (auto it = overrides_.find({category, setting}); it != overrides_.end()) return it->second;
  return builtin_template(category, setting);
}

void TemplateSet::set(InstructionTemplate tmpl) {
  const auto key = std::make_pair(tmpl.category, tmpl.setting);
  overrides_.insert_or_assign(key, std::move(tmpl));
}

namespace {

const SentencePool& pool_for(const PoolMap& pools, const Dataset& dataset) {
  auto it = pools.find(dataset.name());
  if (it == pools.end()) throw GridError("no sentence pool loaded for dataset '" + dataset.name() + "'");
  return it->second;
}

void check_budget(int p, double r) {
  if (p < 1) throw GridError("token budget p must be >= 1, got " + std::to_string(p));
  if (!(r >= 0.0 && r <= 1.0)) throw GridError("harm ratio r must lie in [0, 1], got " + format_ratio(r));
}

Setting make_setting(RunMode mode, const DatasetConfig& dc, const ExperimentConfig& config,
                     std::optional<PromptSpec> spec, int trials) {
  Setting s;
  s.mode = mode;
  s.dataset = dc.dataset;
  s.category = dc.category;
  s.model = config.backend.model_name();
  s.trials = trials;
  if (spec) spec->category = dc.category;
  s.spec = spec;
  s.setting_id = make_setting_id(s);
  return s;
}

PromptSpec budget_spec(int p, double r, Region h, HarmSelection t) {
  check_budget(p, r);
  PromptSpec spec;
  spec.mode = SizingMode::kTokenBudget;
  spec.budget_tokens = p;
  spec.harm_ratio = r;
  spec.region = h;
  spec.harm_type = t;
  return spec;
}

PromptSpec count_spec(int s, int n) {
  PromptSpec spec;
  spec.mode = SizingMode::kSentenceCount;
  spec.sentence_count = s;
  spec.harmful_count = n;
  spec.region = Region::kAll;
  spec.harm_type = HarmSelection::kBoth;
  return spec;
}

std::vector<std::pair<int, int>> dilution_pairs(const DilutionGrid& grid) {
  std::vector<std::pair<int, int>> pairs;
  if (!grid.pairs.empty()) {
    for (auto [s, n] : grid.pairs) {
      if (n < 1 || n >= s) {
        throw GridError("dilution pair violates 1 <= n < s (s=" + std::to_string(s) + ", n=" + std::to_string(n) + ")");
      }
      pairs.emplace_back(s, n);
    }
    return pairs;
  }
  for (int s : grid.sentence_counts) {
    for (int n : grid.harmful_counts) {
      if (n < 1) throw GridError("dilution harmful count must be >= 1");
      if (n < s) pairs.emplace_back(s, n);
    }
  }
  if (pairs.empty() && !grid.sentence_counts.empty() && !grid.harmful_counts.empty()) {
    throw GridError("dilution grid has no pair with n < s");
  }
  return pairs;
}

std::string reason_prefix(const std::string& reason) {
  const auto colon = reason.find(':');
  const auto paren = reason.find('(');
  return reason.substr(0, std::min(colon, paren));
}

TrialRecord base_record(const Setting& setting, std::int64_t trial_index, std::uint64_t seed) {
  TrialRecord r;
  r.setting_id = setting.setting_id;
  r.axes = setting.axes_json();
  r.trial_index = trial_index;
  r.seed = seed;
  return r;
}

TrialRecord failed(TrialRecord r, std::string reason) {
  r.status = TrialStatus::kFailed;
  r.failure_reason = std::move(reason);
  r.predicted_indices.reset();
  r.raw_text.reset();
  return r;
}

/// Sends the task and fills the transport-dependent fields; false on failure.
bool query(const DetectionTask& task, const RunContext& ctx, TrialRecord& r, CompletionResponse& response) {
  try {
    response = ctx.backend->run(task);
  } catch (const ContextWindowError& e) {
    r = failed(std::move(r), std::string("context window: ") + e.what());
    return false;
  } catch (const std::exception& e) {
    r = failed(std::move(r), std::string("backend: ") + e.what());
    return false;
  }
  r.latency_ms = response.latency_ms;
  if (!response.status.succeeded() || !response.text) {
    r = failed(std::move(r), "transport: " + response.status.describe());
    return false;
  }
  return true;
}

TrialRecord run_sentence_trial(const Setting& setting, std::int64_t trial_index, const LabeledSentence& sentence,
                               const RunContext& ctx) {
  const auto seed = derive_trial_seed(ctx.config->master_seed, setting.setting_id,
                                      static_cast<std::uint64_t>(trial_index));
  auto r = base_record(setting, trial_index, seed);
  r.sentence_ids = {sentence.id};
  r.realized_tokens = sentence.token_count;
  r.realized_harm_ratio = sentence.harmful() ? 1.0 : 0.0;
  if (sentence.harmful()) r.truth_indices = {1};

  const auto& tmpl = ctx.templates.get(setting.category, PromptSetting::kSentenceLevel);
  DetectionTask task;
  task.request.model = setting.model;
  task.request.prompt = render_sentence_level(tmpl, sentence);
  task.request.context_window = ctx.config->backend.context_window;
  task.sentence = &sentence;
  try {
    task.request.max_tokens =
        dynamic_max_tokens(0, task.request.context_window, ctx.counter->count(task.request.prompt));
  } catch (const ContextWindowError& e) {
    return failed(std::move(r), std::string("context window: ") + e.what());
  }

  CompletionResponse response;
  if (!query(task, ctx, r, response)) return r;
  const auto parsed = parse_yes_no(*response.text);
  r.anomalies = parsed.anomalies;
  r.raw_text = *response.text;
  r.raw_hash = sha256_hex(*response.text);
  r.predicted_indices = parsed.label == Label::kHarmful ? std::vector<int>{1} : std::vector<int>{};
  return r;
}

}  // namespace

PoolMap load_pools(const ExperimentConfig& config, const TokenCounter& counter) {
  PoolMap pools;
  for (const auto& dc : config.datasets) {
    pools.insert_or_assign(dc.dataset.name(), load_corpus(dc.path, dc.dataset, counter));
  }
  return pools;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config, std::shared_ptr<const TokenCounter> counter) {
  if (config.is_mock()) {
    return std::make_unique<MockDetector>(MockDetectorConfig::parse(std::string_view(config.kind).substr(5)));
  }
  if (config.kind != "openai") throw GridError("unknown backend kind '" + config.kind + "'");
  if (config.endpoint.empty()) throw GridError("backend 'openai' needs an endpoint");
  ClientOptions options;
  options.max_inflight = config.max_inflight;
  options.retry = config.retry;
  return std::make_unique<OpenAiClient>(Endpoint{config.endpoint, resolve_api_key(config.api_key_file)},
                                        std::move(counter), options);
}

std::vector<std::uint64_t> balanced_seeds(const ExperimentConfig& config) {
  if (!config.balanced.seeds.empty()) return config.balanced.seeds;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < kBalancedSeedCount; ++i) {
    seeds.push_back(derive_trial_seed(config.master_seed, "sentence_level_balanced", static_cast<std::uint64_t>(i)));
  }
  return seeds;
}

std::vector<std::size_t> balanced_subset(const SentencePool& pool, std::uint64_t seed) {
  const auto harmful = pool.stratum(Stratum::kHarmfulAny);
  const auto non_harmful = pool.stratum(Stratum::kNonHarmful);
  if (non_harmful.size() < harmful.size()) {
    throw SamplingError(Stratum::kNonHarmful, harmful.size(), non_harmful.size());
  }
  Rng rng(seed);
  StratumDraw draw(pool, Stratum::kNonHarmful, rng);
  std::vector<std::size_t> positions(harmful.begin(), harmful.end());
  for (std::size_t i = 0; i < harmful.size(); ++i) {
    const auto* s = draw.next();
    positions.push_back(*pool.find(s->id));
  }
  std::sort(positions.begin(), positions.end());
  return positions;
}

std::vector<Setting> expand_grid(const ExperimentConfig& config, RunMode mode, const PoolMap& pools) {
  std::vector<Setting> settings;
  for (const auto& dc : config.datasets) {
    switch (mode) {
      case RunMode::kPrevalence:
        for (int p : config.prevalence.budgets)
          for (double r : config.prevalence.ratios)
            for (Region h : config.prevalence.regions)
              for (HarmSelection t : config.prevalence.harm_types)
                settings.push_back(make_setting(mode, dc, config, budget_spec(p, r, h, t), config.trials));
        break;
      case RunMode::kDilution:
        for (auto [s, n] : dilution_pairs(config.dilution))
          settings.push_back(make_setting(mode, dc, config, count_spec(s, n), config.trials));
        break;
      case RunMode::kRegion:
        for (Region h : config.region.regions)
          settings.push_back(make_setting(
              mode, dc, config, budget_spec(config.region.budget, config.region.ratio, h, config.region.harm_type),
              config.trials));
        break;
      case RunMode::kType:
        for (HarmSelection t : config.type.harm_types)
          settings.push_back(make_setting(
              mode, dc, config, budget_spec(config.type.budget, config.type.ratio, config.type.region, t),
              config.trials));
        break;
      case RunMode::kSentenceLevel: {
        const auto& pool = pool_for(pools, dc.dataset);
        settings.push_back(make_setting(mode, dc, config, std::nullopt, static_cast<int>(pool.size())));
        break;
      }
      case RunMode::kSentenceLevelBalanced: {
        const auto& pool = pool_for(pools, dc.dataset);
        const auto per_seed = static_cast<int>(2 * pool.stratum(Stratum::kHarmfulAny).size());
        for (auto seed : balanced_seeds(config)) {
          auto s = make_setting(mode, dc, config, std::nullopt, per_seed);
          s.balance_seed = seed;
          s.setting_id = make_setting_id(s);
          settings.push_back(std::move(s));
        }
        break;
      }
    }
  }
  return settings;
}

TrialRecord run_trial(const Setting& setting, std::int64_t trial_index, const RunContext& ctx) {
  const auto& pool = pool_for(*ctx.pools, setting.dataset);

  if (setting.mode == RunMode::kSentenceLevel) {
    return run_sentence_trial(setting, trial_index, pool.at(static_cast<std::size_t>(trial_index)), ctx);
  }
  if (setting.mode == RunMode::kSentenceLevelBalanced) {
    // Recomputed per trial so any single trial can be run in isolation.
    const auto subset = balanced_subset(pool, setting.balance_seed.value_or(0));
    return run_sentence_trial(setting, trial_index, pool.at(subset.at(static_cast<std::size_t>(trial_index))), ctx);
  }

  const auto seed = derive_trial_seed(ctx.config->master_seed, setting.setting_id,
                                      static_cast<std::uint64_t>(trial_index));
  auto r = base_record(setting, trial_index, seed);
  auto spec = setting.spec.value();
  spec.seed = seed;

  ConstructedPrompt prompt;
  try {
    prompt = build_prompt(pool, spec, ctx.templates.get(setting.category, PromptSetting::kLongContext),
                          ctx.config->synthesis);
  } catch (const std::exception& e) {
    return failed(std::move(r), std::string("construction: ") + e.what());
  }
  r.truth_indices = prompt.truth_indices;
  r.realized_tokens = prompt.realized_tokens;
  r.realized_harm_ratio = prompt.realized_harm_ratio;
  r.sentence_ids.reserve(prompt.items.size());
  for (const auto& item : prompt.items) r.sentence_ids.push_back(item.sentence.id);

  DetectionTask task;
  task.request.model = setting.model;
  task.request.prompt = prompt.rendered_text;
  task.request.context_window = ctx.config->backend.context_window;
  task.prompt = &prompt;
  try {
    // Any index may be flagged, so size the answer for the whole list.
    task.request.max_tokens =
        dynamic_max_tokens(prompt.size(), task.request.context_window, ctx.counter->count(prompt.rendered_text));
  } catch (const ContextWindowError& e) {
    return failed(std::move(r), std::string("context window: ") + e.what());
  }

  CompletionResponse response;
  if (!query(task, ctx, r, response)) return r;
  auto parsed = parse_index_list(*response.text, prompt.size());
  r.predicted_indices = std::move(parsed.indices);
  r.anomalies = parsed.anomalies;
  r.raw_hash = std::move(parsed.raw_hash);
  r.raw_text = std::move(*response.text);
  return r;
}

RunSummary run_grid(const std::vector<Setting>& settings, TrialStore& store, const RunContext& ctx,
                    const RunOptions& options) {
  RunSummary summary;
  summary.settings = settings.size();

  std::vector<std::pair<const Setting*, std::int64_t>> pending;
  for (const auto& setting : settings) {
    for (std::int64_t t = 0; t < setting.trials; ++t) {
      ++summary.trials_total;
      if (store.contains(setting.setting_id, t)) {
        ++summary.skipped;
      } else {
        pending.emplace_back(&setting, t);
      }
    }
  }
  if (pending.empty()) return summary;

  const std::size_t limit = std::min(pending.size(), options.max_new_trials.value_or(pending.size()));
  summary.interrupted = limit < pending.size();
  std::atomic<std::size_t> next{0};
  std::mutex summary_mutex;
  std::exception_ptr worker_error;

  const auto worker = [&] {
    while (true) {
      const auto i = next.fetch_add(1);
      if (i >= limit) return;
      try {
        const auto record = run_trial(*pending[i].first, pending[i].second, ctx);
        store.append(record);
        std::lock_guard lock(summary_mutex);
        if (record.status == TrialStatus::kOk) {
          ++summary.executed_ok;
        } else {
          ++summary.executed_failed;
          ++summary.failure_reasons[reason_prefix(record.failure_reason)];
        }
      } catch (...) {
        std::lock_guard lock(summary_mutex);
        if (!worker_error) worker_error = std::current_exception();
        next.store(limit);
        return;
      }
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, ctx.config->concurrency));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < std::min(workers, limit); ++w) threads.emplace_back(worker);
  }
  if (worker_error) std::rethrow_exception(worker_error);
  return summary;
}

std::vector<std::vector<TrialRecord>> run_sentence_level_balanced(const Dataset& dataset,
                                                                  const std::vector<std::uint64_t>& seeds,
                                                                  const RunContext& ctx) {
  const auto& pool = pool_for(*ctx.pools, dataset);
  const auto dc = std::find_if(ctx.config->datasets.begin(), ctx.config->datasets.end(),
                               [&](const DatasetConfig& d) { return d.dataset == dataset; });
  DatasetConfig fallback{dataset, {}, default_category(dataset).value_or(Category::kToxic)};
  const DatasetConfig& chosen = dc != ctx.config->datasets.end() ? *dc : fallback;

  std::vector<std::vector<TrialRecord>> out;
  for (auto seed : seeds) {
    const auto subset = balanced_subset(pool, seed);
    auto setting = make_setting(RunMode::kSentenceLevelBalanced, chosen, *ctx.config, std::nullopt,
                                static_cast<int>(subset.size()));
    setting.balance_seed = seed;
    setting.setting_id = make_setting_id(setting);
    std::vector<TrialRecord> records;
    records.reserve(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
      records.push_back(run_sentence_trial(setting, static_cast<std::int64_t>(i), pool.at(subset[i]), ctx));
    }
    out.push_back(std::move(records));
  }
  return out;
}

}  // namespace harmscope
