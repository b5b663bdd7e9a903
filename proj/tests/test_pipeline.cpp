#include <doctest.h>

#include <algorithm>
#include <set>

#include "harmscope/mock_detector.hpp"
#include "harmscope/report.hpp"
#include "harmscope/runner.hpp"
#include "support.hpp"

using namespace harmscope;
using testing::TempDir;

namespace {

class FailingBackend final : public Backend {
 public:
  CompletionResponse run(const DetectionTask&) override {
    CompletionResponse r;
    r.status = TransportStatus::failed("connection refused", 4);
    return r;
  }
  std::string name() const override { return "failing"; }
};

struct Fixture {
  ExperimentConfig config;
  PoolMap pools;
  std::unique_ptr<Backend> backend;
  RunContext ctx;

  explicit Fixture(const std::string& mock = "oracle", int trials = 4, std::size_t pool_size = 3000) {
    config.trials = trials;
    config.datasets.push_back({Dataset::from_name("ihc"), {}, Category::kHate});
    config.backend.kind = "mock:" + mock;
    pools.insert_or_assign("ihc", testing::synthetic_pool(pool_size, 0.4, 0.5));
    backend = make_backend(config.backend, nullptr);
    refresh();
  }
  void use(Backend* b) {
    ctx.backend = b;
  }
  void refresh() {
    ctx.config = &config;
    ctx.pools = &pools;
    ctx.backend = backend.get();
    ctx.counter = std::make_shared<WhitespaceTokenCounter>(config.token_multiplier);
  }
  const SentencePool& pool() const { return pools.at("ihc"); }
};

std::string tables_of(const std::vector<TrialRecord>& records, const std::filesystem::path& out) {
  const auto agg = aggregate(records);
  std::string all;
  for (const auto& path : emit_tables(agg, out)) all += testing::read_file(path);
  return all;
}

TrialRecord sample_record() {
  TrialRecord r;
  r.setting_id = "0123456789abcdef";
  r.axes = {{"mode", "prevalence"}};
  r.trial_index = 3;
  r.seed = 99;
  r.truth_indices = {2, 5};
  r.predicted_indices = std::vector<int>{2};
  r.raw_text = "2";
  r.raw_hash = "h";
  r.sentence_ids = {"a", "b", "c", "d", "e"};
  r.realized_tokens = 150;
  r.realized_harm_ratio = 0.4;
  return r;
}

}  // namespace

TEST_CASE("record lines round-trip with a trailing checksum") {
  auto r = sample_record();
  r.anomalies.set(Anomaly::kHadProse);
  const auto line = encode_record_line(r);
  CHECK(line.find("\"checksum\":\"") == line.size() - 30);
  const auto back = decode_record_line(line);
  CHECK(back.to_json() == r.to_json());

  auto tampered = line;
  tampered[tampered.find("\"seed\":99") + 7] = '8';
  CHECK_THROWS_AS(decode_record_line(tampered), StoreCorruption);
  CHECK_THROWS_AS(decode_record_line("{\"a\":1}"), StoreCorruption);
  CHECK_THROWS_AS(decode_record_line("garbage"), StoreCorruption);
}

TEST_CASE("invalid UTF-8 in model output is stored with replacement characters") {
  auto r = sample_record();
  r.raw_text = std::string("ok \xff\xfe end");
  const auto back = decode_record_line(encode_record_line(r));
  REQUIRE(back.raw_text.has_value());
  CHECK(back.raw_text->find("\xEF\xBF\xBD") != std::string::npos);
}

TEST_CASE("trial store") {
  TempDir dir("store");
  const auto path = dir / "s.jsonl";
  {
    TrialStore store(path);
    for (int i = 0; i < 3; ++i) {
      auto r = sample_record();
      r.trial_index = i;
      store.append(r);
    }
    CHECK(store.size() == 3);
    CHECK(store.contains("0123456789abcdef", 1));
  }

  SUBCASE("duplicate keys are refused") {
    TrialStore store(path);
    auto r = sample_record();
    r.trial_index = 0;
    CHECK_THROWS_AS(store.append(r), StoreCorruption);
  }
  SUBCASE("a torn final line is dropped on open") {
    {
      std::ofstream out(path, std::ios::binary | std::ios::app);
      out << "{\"setting_id\":\"0123";
    }
    TrialStore store(path);
    CHECK(store.repaired_tail());
    CHECK(store.size() == 3);
    const auto content = testing::read_file(path);
    CHECK(content.back() == '\n');
    CHECK(TrialStore::read_all(path).size() == 3);
  }
  SUBCASE("a corrupted middle line is reported with its line number") {
    auto content = testing::read_file(path);
    content[content.find("\"seed\":99")+7] = '1';
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << content;
    }
    try {
      TrialStore::read_all(path);
      FAIL("expected corruption");
    } catch (const StoreCorruption& e) {
      CHECK(std::string(e.what()).find(":1:") != std::string::npos);
    }
    CHECK_THROWS_AS(TrialStore{path}, StoreCorruption);
  }
  SUBCASE("duplicated lines are corruption") {
    const auto content = testing::read_file(path);
    {
      std::ofstream out(path, std::ios::binary | std::ios::app);
      out << content.substr(0, content.find('\n') + 1);
    }
    CHECK_THROWS_AS(TrialStore::read_all(path), StoreCorruption);
  }
}

TEST_CASE("grid expansion") {
  Fixture f;
  CHECK(expand_grid(f.config, RunMode::kPrevalence, f.pools).size() == 192);
  CHECK(expand_grid(f.config, RunMode::kRegion, f.pools).size() == 4);
  CHECK(expand_grid(f.config, RunMode::kType, f.pools).size() == 3);

  std::size_t pairs = 0;
  for (int s = 20; s <= 200; s += 20)
    for (int n = 10; n <= 100; n += 10) pairs += n < s;
  const auto dilution = expand_grid(f.config, RunMode::kDilution, f.pools);
  CHECK(dilution.size() == pairs);
  for (const auto& s : dilution) CHECK(s.spec->harmful_count < s.spec->sentence_count);

  const auto region = expand_grid(f.config, RunMode::kRegion, f.pools);
  for (const auto& s : region) {
    CHECK(s.spec->budget_tokens == 1500);
    CHECK(s.spec->harm_ratio == 0.25);
    CHECK(s.spec->harm_type == HarmSelection::kBoth);
  }

  std::set<std::string> ids;
  for (auto mode : {RunMode::kPrevalence, RunMode::kDilution, RunMode::kRegion, RunMode::kType})
    for (const auto& s : expand_grid(f.config, mode, f.pools)) ids.insert(s.setting_id);
  // The mode is an axis, so equal specs in different modes still get distinct ids.
  CHECK(ids.size() == 192 + pairs + 4 + 3);

  const auto sentence = expand_grid(f.config, RunMode::kSentenceLevel, f.pools);
  REQUIRE(sentence.size() == 1);
  CHECK(sentence[0].trials == 3000);

  f.config.dilution.pairs = {{50, 100}};
  CHECK_THROWS_AS(expand_grid(f.config, RunMode::kDilution, f.pools), GridError);
  f.config.prevalence.ratios = {1.5};
  CHECK_THROWS_AS(expand_grid(f.config, RunMode::kPrevalence, f.pools), GridError);

  ExperimentConfig empty;
  CHECK(expand_grid(empty, RunMode::kPrevalence, {}).empty());
  TempDir dir("empty");
  TrialStore store(dir / "s.jsonl");
  const auto summary = run_grid({}, store, f.ctx);
  CHECK(summary.settings == 0);
  CHECK(summary.trials_total == 0);
}

TEST_CASE("setting ids are stable and canonical") {
  Fixture f;
  const auto a = expand_grid(f.config, RunMode::kPrevalence, f.pools);
  const auto b = expand_grid(f.config, RunMode::kPrevalence, f.pools);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].setting_id == b[i].setting_id);
    CHECK(Setting::from_axes_json(a[i].axes_json()).setting_id == a[i].setting_id);
  }
  f.config.trials = 999;  // k is not an axis
  CHECK(expand_grid(f.config, RunMode::kPrevalence, f.pools)[0].setting_id == a[0].setting_id);
}

TEST_CASE("single trials") {
  Fixture f;
  const auto settings = expand_grid(f.config, RunMode::kRegion, f.pools);

  SUBCASE("oracle answers the truth") {
    for (const auto& s : settings) {
      const auto r = run_trial(s, 0, f.ctx);
      REQUIRE(r.status == TrialStatus::kOk);
      CHECK(*r.predicted_indices == r.truth_indices);
      CHECK(r.sentence_ids.size() >= r.truth_indices.size());
    }
  }
  SUBCASE("reruns are identical") {
    auto noisy = make_backend(BackendConfig{"mock:noisy:fp=0.2,fn=0.2"}, nullptr);
    f.use(noisy.get());
    const auto a = run_trial(settings[1], 5, f.ctx);
    const auto b = run_trial(settings[1], 5, f.ctx);
    CHECK(encode_record_line(a) == encode_record_line(b));
    CHECK(run_trial(settings[1], 6, f.ctx).seed != a.seed);
  }
  SUBCASE("transport failure becomes a failed record") {
    FailingBackend failing;
    f.use(&failing);
    const auto r = run_trial(settings[0], 0, f.ctx);
    CHECK(r.status == TrialStatus::kFailed);
    CHECK(!r.raw_text.has_value());
    CHECK(!r.predicted_indices.has_value());
    CHECK(r.failure_reason.rfind("transport", 0) == 0);
  }
  SUBCASE("a prompt too long for the window fails before the backend") {
    f.config.backend.context_window = 100;
    const auto r = run_trial(settings[0], 0, f.ctx);
    CHECK(r.status == TrialStatus::kFailed);
    CHECK(r.failure_reason.rfind("context window", 0) == 0);
  }
  SUBCASE("an impossible region placement is a failed record") {
    f.config.region.ratio = 0.5;
    const auto crowded = expand_grid(f.config, RunMode::kRegion, f.pools);
    const auto r = run_trial(crowded[0], 0, f.ctx);  // beginning third cannot hold half the prompt
    CHECK(r.status == TrialStatus::kFailed);
    CHECK(r.failure_reason.rfind("construction", 0) == 0);
  }
}

TEST_CASE("trial records do not depend on execution order") {
  Fixture f("noisy:fp=0.1,fn=0.3");
  const auto settings = expand_grid(f.config, RunMode::kType, f.pools);
  std::vector<std::string> forward, backward;
  for (const auto& s : settings)
    for (int t = 0; t < 4; ++t) forward.push_back(encode_record_line(run_trial(s, t, f.ctx)));
  for (auto s = settings.rbegin(); s != settings.rend(); ++s)
    for (int t = 3; t >= 0; --t) backward.push_back(encode_record_line(run_trial(*s, t, f.ctx)));
  std::sort(forward.begin(), forward.end());
  std::sort(backward.begin(), backward.end());
  CHECK(forward == backward);
}

TEST_CASE("grid runs resume and skip") {
  Fixture f("noisy:fp=0.1,fn=0.2", 6);
  const auto settings = expand_grid(f.config, RunMode::kDilution, f.pools);
  TempDir dir("resume");

  TrialStore full(dir / "full.jsonl");
  const auto first = run_grid(settings, full, f.ctx);
  CHECK(first.executed_ok == settings.size() * 6);
  CHECK(first.skipped == 0);
  const auto again = run_grid(settings, full, f.ctx);
  CHECK(again.skipped == again.trials_total);
  CHECK(again.executed_ok + again.executed_failed == 0);

  {
    TrialStore partial(dir / "partial.jsonl");
    RunOptions stop;
    stop.max_new_trials = 50;
    const auto cut = run_grid(settings, partial, f.ctx, stop);
    CHECK(cut.interrupted);
    CHECK(partial.size() == 50);
  }
  f.config.concurrency = 4;
  TrialStore resumed(dir / "partial.jsonl");
  const auto rest = run_grid(settings, resumed, f.ctx);
  CHECK(rest.skipped == 50);
  CHECK(!rest.interrupted);

  const auto a = tables_of(TrialStore::read_all(dir / "full.jsonl"), dir / "a");
  const auto b = tables_of(TrialStore::read_all(dir / "partial.jsonl"), dir / "b");
  CHECK(!a.empty());
  CHECK(a == b);
}

TEST_CASE("balanced sentence-level runs") {
  Fixture f("oracle", 4, 1000);
  f.pools.insert_or_assign("ihc", testing::fixed_pool(60, 40, 900, 12));
  const auto subset = balanced_subset(f.pool(), 1);
  CHECK(subset.size() == 200);
  CHECK(std::count_if(subset.begin(), subset.end(), [&](std::size_t i) { return f.pool().at(i).harmful(); }) == 100);
  CHECK(balanced_subset(f.pool(), 1) == subset);
  CHECK(balanced_subset(f.pool(), 2) != subset);

  const auto seeds = balanced_seeds(f.config);
  CHECK(seeds.size() == 5);
  const auto runs = run_sentence_level_balanced(Dataset::from_name("ihc"), seeds, f.ctx);
  REQUIRE(runs.size() == 5);
  for (const auto& records : runs) {
    CHECK(records.size() == 200);
    const auto agg = aggregate(records);
    REQUIRE(agg.reports.size() == 1);
    CHECK(agg.reports[0].pooled->macro_f1 == 100.0);
  }

  const auto settings = expand_grid(f.config, RunMode::kSentenceLevelBalanced, f.pools);
  CHECK(settings.size() == 5);
  for (const auto& s : settings) CHECK(s.trials == 200);

  f.pools.insert_or_assign("ihc", testing::fixed_pool(60, 40, 50, 12));
  CHECK_THROWS_AS(balanced_subset(f.pool(), 1), SamplingError);
}

TEST_CASE("aggregation") {
  Fixture f("noisy:fp=0.1,fn=0.2", 8);
  TempDir dir("agg");
  TrialStore store(dir / "s.jsonl");
  run_grid(expand_grid(f.config, RunMode::kRegion, f.pools), store, f.ctx);
  const auto records = TrialStore::read_all(dir / "s.jsonl");
  const auto agg = aggregate(records);
  REQUIRE(agg.reports.size() == 4);

  SUBCASE("pooled counts conserve every trial") {
    for (const auto& rep : agg.reports) {
      ConfusionCounts sum;
      for (const auto& r : records) {
        if (r.setting_id == rep.setting.setting_id) sum += confusion(*r.predicted_indices, r.truth_indices, r.max_index());
      }
      CHECK(sum == rep.pooled_counts);
      ConfusionCounts folded;
      for (const auto& c : rep.trial_counts) folded += c;
      CHECK(folded == rep.pooled_counts);
      CHECK(rep.ok_trials == 8);
    }
  }
  SUBCASE("region rows come in reading order") {
    const Region order[] = {Region::kBeginning, Region::kMiddle, Region::kEnd, Region::kAll};
    for (int i = 0; i < 4; ++i) CHECK(agg.reports[static_cast<std::size_t>(i)].setting.spec->region == order[i]);
  }
  SUBCASE("one trial: pooled equals per-run") {
    std::vector<TrialRecord> one = {records.front()};
    const auto single = aggregate(one);
    CHECK(single.reports[0].pooled->macro_f1 == doctest::Approx(single.reports[0].per_run->macro_f1).epsilon(1e-12));
    CHECK(single.reports[0].pooled->ppv == doctest::Approx(single.reports[0].per_run->ppv).epsilon(1e-12));
  }
  SUBCASE("failed trials are counted, not scored") {
    auto with_failure = records;
    auto failed = records.front();
    failed.trial_index = 100;
    failed.status = TrialStatus::kFailed;
    failed.predicted_indices.reset();
    failed.raw_text.reset();
    with_failure.push_back(failed);
    const auto agg2 = aggregate(with_failure);
    const auto& rep = *std::find_if(agg2.reports.begin(), agg2.reports.end(), [&](const SettingReport& r) {
      return r.setting.setting_id == failed.setting_id;
    });
    CHECK(rep.failed_trials == 1);
    CHECK(rep.failure_rate() == doctest::Approx(1.0 / 9));
  }
  SUBCASE("settings without a successful trial are reported") {
    std::vector<TrialRecord> only_failed;
    auto r = records.front();
    r.status = TrialStatus::kFailed;
    r.predicted_indices.reset();
    only_failed.push_back(r);
    const auto agg3 = aggregate(only_failed);
    CHECK(!agg3.reports[0].pooled.has_value());
    CHECK_NOTHROW(emit_report(agg3, dir / "failed"));
    CHECK(testing::read_file(dir / "failed" / "tables" / "region.csv").find(",,,,,") != std::string::npos);
  }
  CHECK_THROWS_AS(aggregate({}), ReportError);
}

TEST_CASE("per-run and pooled agree on equal-sized runs") {
  Fixture f("noisy:fp=0.1,fn=0.2", 128);
  f.config.dilution.pairs = {{200, 50}};
  TempDir dir("macro");
  TrialStore store(dir / "s.jsonl");
  run_grid(expand_grid(f.config, RunMode::kDilution, f.pools), store, f.ctx);
  const auto agg = aggregate_store(dir / "s.jsonl");
  const auto& p = *agg.reports[0].pooled;
  const auto& r = *agg.reports[0].per_run;
  CHECK(std::abs(p.macro_f1 - r.macro_f1) < 0.5);
  CHECK(std::abs(p.ppv - r.ppv) < 0.5);
  CHECK(std::abs(p.harmful_precision - r.harmful_precision) < 0.5);
  CHECK(std::abs(p.harmful_recall - r.harmful_recall) < 0.5);
}

TEST_CASE("sentence-level baselines") {
  Fixture f("oracle", 4, 600);
  TempDir dir("baseline");
  TrialStore store(dir / "s.jsonl");
  const auto type_settings = expand_grid(f.config, RunMode::kType, f.pools);
  run_grid(type_settings, store, f.ctx);

  SUBCASE("absent without companions") {
    const auto agg = aggregate_store(dir / "s.jsonl");
    for (const auto& rep : agg.reports) CHECK(!rep.baseline.has_value());
  }
  SUBCASE("absent with partial coverage") {
    RunOptions stop;
    stop.max_new_trials = 10;
    run_grid(expand_grid(f.config, RunMode::kSentenceLevel, f.pools), store, f.ctx, stop);
    const auto agg = aggregate_store(dir / "s.jsonl");
    for (const auto& rep : agg.reports) {
      if (is_long_context(rep.setting.mode)) CHECK(!rep.baseline.has_value());
    }
  }
  SUBCASE("present over exactly the prompt sentences") {
    run_grid(expand_grid(f.config, RunMode::kSentenceLevel, f.pools), store, f.ctx);
    const auto agg = aggregate_store(dir / "s.jsonl");
    for (const auto& rep : agg.reports) {
      if (!is_long_context(rep.setting.mode)) continue;
      REQUIRE(rep.baseline.has_value());
      CHECK(rep.baseline->support_total == static_cast<std::int64_t>(rep.sentence_ids.size()));
      CHECK(rep.baseline->macro_f1 == 100.0);
      std::set<std::string> from_records;
      for (const auto& r : TrialStore::read_all(dir / "s.jsonl")) {
        if (r.setting_id == rep.setting.setting_id) from_records.insert(r.sentence_ids.begin(), r.sentence_ids.end());
      }
      CHECK(std::vector<std::string>(from_records.begin(), from_records.end()) == rep.sentence_ids);
    }
    const auto summary = emit_report(agg, dir / "out");
    const auto plot = testing::read_file(dir / "out" / "plotdata" / "type.csv");
    CHECK(plot.find(",sentence-level,") != std::string::npos);
    CHECK(plot.find(",long-context,") != std::string::npos);
    CHECK(summary["empty_families"] == nlohmann::json({"prevalence", "dilution", "region"}));
    CHECK(!std::filesystem::exists(dir / "out" / "plotdata" / "prevalence.csv"));
  }
}

TEST_CASE("emitted tables and plot data") {
  Fixture f("positional_decay:base=0.95,decay=0.02", 16);
  TempDir dir("emit");
  TrialStore store(dir / "s.jsonl");
  f.config.prevalence.budgets = {600, 1500};
  f.config.prevalence.ratios = {0.1, 0.25};
  f.config.prevalence.regions = {Region::kAll};
  f.config.prevalence.harm_types = {HarmSelection::kBoth};
  run_grid(expand_grid(f.config, RunMode::kPrevalence, f.pools), store, f.ctx);
  run_grid(expand_grid(f.config, RunMode::kRegion, f.pools), store, f.ctx);
  const auto agg = aggregate_store(dir / "s.jsonl");
  emit_report(agg, dir / "a");
  emit_report(aggregate_store(dir / "s.jsonl"), dir / "b");

  for (const auto* name : {"tables/prevalence.csv", "tables/prevalence.json", "tables/region.csv",
                           "plotdata/prevalence.csv", "plotdata/region.csv", "summary.json"}) {
    CAPTURE(name);
    const auto a = testing::read_file(dir / "a" / name);
    CHECK(!a.empty());
    CHECK(a == testing::read_file(dir / "b" / name));
  }

  const auto csv = testing::read_file(dir / "a" / "tables" / "prevalence.csv");
  CHECK(csv.rfind("dataset,model,category,p,r,region,harm_type,macro_f1,ppv,harmful_precision,harmful_recall,"
                  "harmful_f1,n_trials,n_sentences,failure_rate", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  const auto region = testing::read_file(dir / "a" / "tables" / "region.csv");
  const auto b = region.find(",beginning,"), m = region.find(",middle,"), e = region.find(",end,"), a = region.find(",all,");
  CHECK(b < m);
  CHECK(m < e);
  CHECK(e < a);

  const auto plot = testing::read_file(dir / "a" / "plotdata" / "prevalence.csv");
  CHECK(plot.rfind("dataset,model,category,facet,x,series,metric,value\n", 0) == 0);
  CHECK(plot.find(",0.25,p=1500,harmful_recall,") != std::string::npos);
  CHECK(plot.find(",0.1,p=600,macro_f1,") != std::string::npos);
  // 4 settings x 4 metric panels, no baselines without sentence-level runs.
  CHECK(std::count(plot.begin(), plot.end(), '\n') == 1 + 16);
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"x\"") == "\"say \"\"x\"\"\"");
}
