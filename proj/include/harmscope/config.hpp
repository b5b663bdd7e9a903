#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmscope/corpus.hpp"
#include "harmscope/openai_client.hpp"
#include "harmscope/synthesis.hpp"
#include "harmscope/templates.hpp"

namespace harmscope {

/// Shipped configs reproduce themselves bit-for-bit under this seed.
inline constexpr std::uint64_t kDefaultMasterSeed = 20240817;
inline constexpr int kDefaultTrials = 128;
inline constexpr int kBalancedSeedCount = 5;

struct DatasetConfig {
  Dataset dataset;
  std::filesystem::path path;
  Category category = Category::kToxic;
};

struct PrevalenceGrid {
  std::vector<int> budgets{600, 1500, 3000, 6000};
  std::vector<double> ratios{0.05, 0.1, 0.25, 0.5};
  std::vector<Region> regions{Region::kBeginning, Region::kMiddle, Region::kEnd, Region::kAll};
  std::vector<HarmSelection> harm_types{HarmSelection::kImplicit, HarmSelection::kExplicit, HarmSelection::kBoth};
};

/// Either a product of sentence and harmful counts (pairs with n >= s are
/// skipped) or an explicit pair list (any n >= s is an error).
struct DilutionGrid {
  std::vector<int> sentence_counts{20, 40, 60, 80, 100, 120, 140, 160, 180, 200};
  std::vector<int> harmful_counts{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<std::pair<int, int>> pairs;  // (s, n)
};

struct RegionGrid {
  int budget = 1500;
  double ratio = 0.25;
  HarmSelection harm_type = HarmSelection::kBoth;
  std::vector<Region> regions{Region::kBeginning, Region::kMiddle, Region::kEnd, Region::kAll};
};

struct TypeGrid {
  int budget = 1500;
  double ratio = 0.25;
  Region region = Region::kAll;
  std::vector<HarmSelection> harm_types{HarmSelection::kExplicit, HarmSelection::kImplicit, HarmSelection::kBoth};
};

struct BalancedGrid {
  std::vector<std::uint64_t> seeds;  // empty: five seeds derived from the master seed
};

struct BackendConfig {
  std::string kind = "mock:oracle";  // "openai" or "mock:<kind>[:params]"
  std::string endpoint;
  std::string model;  // defaults to kind for mocks
  int context_window = 8192;
  int max_inflight = 4;
  std::optional<std::filesystem::path> api_key_file;
  RetryPolicy retry;

  bool is_mock() const { return kind.rfind("mock:", 0) == 0; }
  std::string model_name() const { return model.empty() ? kind : model; }
};

struct ExperimentConfig {
  std::uint64_t master_seed = kDefaultMasterSeed;
  std::filesystem::path store_path = "runs/store.jsonl";
  int concurrency = 1;
  int trials = kDefaultTrials;
  std::vector<DatasetConfig> datasets;
  BackendConfig backend;
  double token_multiplier = 1.3;
  SynthesisOptions synthesis;
  PrevalenceGrid prevalence;
  DilutionGrid dilution;
  RegionGrid region;
  TypeGrid type;
  BalancedGrid balanced;
  /// Keyed by template_file_stem, e.g. "hate_long_context".
  std::map<std::string, std::filesystem::path> template_overrides;

  /// Relative dataset/template/store paths resolve against base_dir.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
};

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace harmscope
