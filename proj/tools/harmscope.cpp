// Command-line front end: ingest corpora, run experiment grids, aggregate stores.
#include <cstdio>
#include <exception>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "harmscope/config.hpp"
#include "harmscope/corpus.hpp"
#include "harmscope/report.hpp"
#include "harmscope/runner.hpp"
#include "harmscope/synthetic.hpp"
#include "harmscope/tokenizer.hpp"

namespace hs = harmscope;

namespace {

int do_ingest(const std::string& input, const std::string& dataset, const std::string& out, double multiplier) {
  hs::WhitespaceTokenCounter counter(multiplier);
  const auto pool = hs::load_corpus(input, hs::Dataset::from_name(dataset), counter);
  hs::write_pool_cache(pool, out);
  const auto& st = pool.stats();
  std::printf("%s: %zu sentences, %zu harmful (%zu explicit, %zu implicit), %zu non-harmful\n", dataset.c_str(),
              st.total, st.harmful, st.harmful_explicit, st.harmful_implicit, st.non_harmful);
  std::printf("harmful fraction %.4f, implicit share of harmful %.4f, mean tokens %.2f, max %d\n",
              st.harmful_fraction, st.implicit_fraction_of_harmful, st.mean_token_count, st.max_token_count);
  return 0;
}

int do_synth(hs::SyntheticCorpusSpec spec, const std::string& dataset, const std::string& out, double multiplier) {
  hs::WhitespaceTokenCounter counter(multiplier);
  spec.dataset = hs::Dataset::from_name(dataset);
  const hs::SentencePool pool(hs::synthetic_sentences(spec, counter));
  hs::write_pool_cache(pool, out);
  std::printf("wrote %zu sentences (%zu harmful) to %s\n", pool.size(), pool.stats().harmful, out.c_str());
  return 0;
}

struct RunArgs {
  std::string config;
  std::string mode;
  std::string backend;
  std::string endpoint;
  std::string model;
  std::string store;
  std::optional<int> max_inflight;
  std::optional<int> trials;
  std::optional<int> concurrency;
  std::optional<std::size_t> limit;
};

int do_run(const RunArgs& args) {
  auto config = hs::load_config(args.config);
  if (!args.backend.empty()) config.backend.kind = args.backend;
  if (!args.endpoint.empty()) config.backend.endpoint = args.endpoint;
  if (!args.model.empty()) config.backend.model = args.model;
  if (!args.store.empty()) config.store_path = args.store;
  if (args.max_inflight) config.backend.max_inflight = *args.max_inflight;
  if (args.trials) config.trials = *args.trials;
  if (args.concurrency) config.concurrency = *args.concurrency;

  const auto mode = hs::parse_run_mode(args.mode);
  auto counter = std::make_shared<hs::WhitespaceTokenCounter>(config.token_multiplier);
  const auto pools = hs::load_pools(config, *counter);
  auto backend = hs::make_backend(config.backend, counter);

  hs::RunContext ctx;
  ctx.config = &config;
  ctx.pools = &pools;
  ctx.backend = backend.get();
  ctx.templates = hs::TemplateSet(config.template_overrides);
  ctx.counter = counter;

  const auto settings = hs::expand_grid(config, mode, pools);
  hs::TrialStore store(config.store_path);
  if (store.repaired_tail()) std::fprintf(stderr, "store: dropped a torn final line\n");

  hs::RunOptions options;
  options.max_new_trials = args.limit;
  const auto summary = hs::run_grid(settings, store, ctx, options);
  std::printf("%s: %zu settings, %zu trials; ran %zu ok, %zu failed; skipped %zu%s\n",
              std::string(hs::to_string(mode)).c_str(), summary.settings, summary.trials_total,
              summary.executed_ok, summary.executed_failed, summary.skipped,
              summary.interrupted ? " (stopped at limit)" : "");
  for (const auto& [reason, count] : summary.failure_reasons) {
    std::printf("  failed %-16s %zu\n", reason.c_str(), count);
  }
  std::printf("store: %s\n", config.store_path.string().c_str());
  return 0;
}

int do_report(const std::string& store, const std::string& out, bool plotdata) {
  const auto agg = hs::aggregate_store(store);
  const auto summary = hs::emit_report(agg, out, plotdata);
  std::printf("%zu records, %zu settings -> %s\n", agg.records, agg.reports.size(), out.c_str());
  if (!summary["settings_without_ok_trials"].empty()) {
    std::printf("%zu settings had no successful trial\n", summary["settings_without_ok_trials"].size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harmful-content detection experiments over synthesized long-context prompts"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "Validate a labelled corpus and write a pool cache");
  std::string input, dataset, ingest_out;
  double multiplier = 1.3;
  ingest->add_option("--input", input, "JSONL corpus")->required()->check(CLI::ExistingFile);
  ingest->add_option("--dataset", dataset, "ihc, offenseval, jigsaw_toxic or a custom name")->required();
  ingest->add_option("--out", ingest_out, "Pool cache path")->required();
  ingest->add_option("--token-multiplier", multiplier, "Tokens per whitespace piece")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled corpus for dry runs");
  hs::SyntheticCorpusSpec synth_spec;
  std::string synth_dataset = "custom", synth_out;
  synth->add_option("--out", synth_out, "JSONL path")->required();
  synth->add_option("--dataset", synth_dataset)->capture_default_str();
  synth->add_option("--size", synth_spec.size)->capture_default_str();
  synth->add_option("--harmful-fraction", synth_spec.harmful_fraction)->capture_default_str();
  synth->add_option("--implicit-share", synth_spec.implicit_share)->capture_default_str();
  synth->add_option("--seed", synth_spec.seed)->capture_default_str();

  auto* run = app.add_subcommand("run", "Run (or resume) one mode's grid into the trial store");
  RunArgs run_args;
  run->add_option("--config", run_args.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", run_args.mode, "Experiment mode")
      ->required()
      ->check(CLI::IsMember({"prevalence", "dilution", "region", "type", "sentence-level", "sentence-level-balanced",
                             "sentence_level", "sentence_level_balanced"}));
  run->add_option("--backend", run_args.backend, "openai or mock:<kind>[:key=value,...]");
  run->add_option("--endpoint", run_args.endpoint, "OpenAI-compatible base URL");
  run->add_option("--model", run_args.model, "Model name sent to the endpoint");
  run->add_option("--store", run_args.store, "Trial store path (overrides the config)");
  run->add_option("--max-inflight", run_args.max_inflight, "Concurrent HTTP requests");
  run->add_option("--trials", run_args.trials, "Trials per setting (k)");
  run->add_option("--concurrency", run_args.concurrency, "Worker threads");
  run->add_option("--limit", run_args.limit, "Stop after this many new trials");

  auto* aggregate = app.add_subcommand("aggregate", "Write per-mode metric tables from a store");
  std::string agg_store, agg_out;
  aggregate->add_option("--store", agg_store)->required()->check(CLI::ExistingFile);
  aggregate->add_option("--out", agg_out)->required();

  auto* report = app.add_subcommand("report", "Write tables, plot data and summary from a store");
  std::string rep_store, rep_out;
  report->add_option("--store", rep_store)->required()->check(CLI::ExistingFile);
  report->add_option("--out", rep_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return do_ingest(input, dataset, ingest_out, multiplier);
    if (*synth) return do_synth(synth_spec, synth_dataset, synth_out, 1.3);
    if (*run) return do_run(run_args);
    if (*aggregate) return do_report(agg_store, agg_out, false);
    if (*report) return do_report(rep_store, rep_out, true);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
