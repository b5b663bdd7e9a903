#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "harmscope/backend.hpp"

namespace harmscope {

/// Parametric stand-ins for detector behaviour, deterministic per prompt.
struct MockDetectorConfig {
  enum class Kind { kOracle, kFlagAll, kFlagNone, kNoisy, kPositionalDecay, kPrevalencePrior, kImplicitPenalty };

  Kind kind = Kind::kOracle;
  double flip_fp = 0.0;             // noisy: P(flag | non-harmful)
  double flip_fn = 0.0;             // noisy: P(miss | harmful)
  double base_recall = 1.0;         // positional_decay
  double decay_per_position = 0.0;  // positional_decay
  double target_ppv = 0.0;          // prevalence_prior
  double delta_recall = 0.0;        // implicit_penalty
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a probability falls outside [0, 1].
  void validate() const;

  /// Parses "<kind>[:key=value,...]", e.g. "noisy:fp=0.1,fn=0.2" or
  /// "positional_decay:base=0.95,decay=0.01,seed=7".
  static MockDetectorConfig parse(std::string_view text);

  /// Canonical form of the same syntax.
  std::string describe() const;
};

std::string_view to_string(MockDetectorConfig::Kind kind);

/// Indices the mock flags for a prompt, ascending.
std::vector<int> mock_flagged_indices(const MockDetectorConfig& config, const ConstructedPrompt& prompt);

/// Comma-separated ascending index list, as a compliant model would answer.
std::string mock_detect(const MockDetectorConfig& config, const ConstructedPrompt& prompt);

/// "yes" or "no" for a single sentence, judged as a one-item prompt.
std::string mock_detect_sentence(const MockDetectorConfig& config, const LabeledSentence& sentence);

class MockDetector final : public Backend {
 public:
  explicit MockDetector(MockDetectorConfig config);

  CompletionResponse run(const DetectionTask& task) override;
  std::string name() const override { return "mock:" + config_.describe(); }
  const MockDetectorConfig& config() const { return config_; }

 private:
  MockDetectorConfig config_;
};

}  // namespace harmscope
