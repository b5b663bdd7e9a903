#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "harmscope/corpus.hpp"
#include "harmscope/synthetic.hpp"
#include "harmscope/tokenizer.hpp"

namespace testing {

using namespace harmscope;

inline LabeledSentence make_sentence(std::string id, Label label, HarmType type, int tokens,
                                     Dataset dataset = Dataset::from_name("custom")) {
  LabeledSentence s;
  s.text = "text of " + id;
  s.id = std::move(id);
  s.label = label;
  s.harm_type = type;
  s.dataset = std::move(dataset);
  s.token_count = tokens;
  return s;
}

/// Pool with fixed-size sentences: explicit, implicit, then non-harmful.
inline SentencePool fixed_pool(int n_explicit, int n_implicit, int n_non, int tokens) {
  std::vector<LabeledSentence> out;
  for (int i = 0; i < n_explicit; ++i) out.push_back(make_sentence("e" + std::to_string(i), Label::kHarmful, HarmType::kExplicit, tokens));
  for (int i = 0; i < n_implicit; ++i) out.push_back(make_sentence("i" + std::to_string(i), Label::kHarmful, HarmType::kImplicit, tokens));
  for (int i = 0; i < n_non; ++i) out.push_back(make_sentence("n" + std::to_string(i), Label::kNonHarmful, HarmType::kNotApplicable, tokens));
  return SentencePool(std::move(out));
}

/// Generated pool with label-independent lengths around 30 tokens.
inline SentencePool synthetic_pool(std::size_t size = 4000, double harmful = 0.4, double implicit = 0.5,
                                   std::uint64_t seed = 11, const std::string& dataset = "ihc") {
  SyntheticCorpusSpec spec;
  spec.dataset = Dataset::from_name(dataset);
  spec.size = size;
  spec.harmful_fraction = harmful;
  spec.implicit_share = implicit;
  spec.seed = seed;
  return SentencePool(synthetic_sentences(spec, WhitespaceTokenCounter()));
}

/// Fresh scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("harmscope-test-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testing
