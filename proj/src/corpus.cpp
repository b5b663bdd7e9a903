#include "harmscope/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace harmscope {

using nlohmann::json;

std::string_view to_string(Label label) {
  return label == Label::kHarmful ? "harmful" : "non_harmful";
}

std::string_view to_string(HarmType type) {
  switch (type) {
    case HarmType::kExplicit: return "explicit";
    case HarmType::kImplicit: return "implicit";
    case HarmType::kNotApplicable: return "not_applicable";
  }
  return "not_applicable";
}

std::string_view to_string(Stratum stratum) {
  switch (stratum) {
    case Stratum::kHarmfulExplicit: return "harmful_explicit";
    case Stratum::kHarmfulImplicit: return "harmful_implicit";
    case Stratum::kHarmfulAny: return "harmful_any";
    case Stratum::kNonHarmful: return "non_harmful";
  }
  return "non_harmful";
}

Label parse_label(std::string_view text) {
  if (text == "harmful") return Label::kHarmful;
  if (text == "non_harmful") return Label::kNonHarmful;
  throw CorpusError("unknown label '" + std::string(text) + "'");
}

HarmType parse_harm_type(std::string_view text) {
  if (text == "explicit") return HarmType::kExplicit;
  if (text == "implicit") return HarmType::kImplicit;
  if (text == "not_applicable") return HarmType::kNotApplicable;
  throw CorpusError("unknown harm_type '" + std::string(text) + "'");
}

Dataset Dataset::from_name(std::string_view name) {
  if (name == "ihc") return {Kind::kIhc, {}};
  if (name == "offenseval") return {Kind::kOffensEval, {}};
  if (name == "jigsaw_toxic") return {Kind::kJigsawToxic, {}};
  if (name.empty()) throw CorpusError("dataset name must not be empty");
  return {Kind::kCustom, std::string(name)};
}

std::string Dataset::name() const {
  switch (kind) {
    case Kind::kIhc: return "ihc";
    case Kind::kOffensEval: return "offenseval";
    case Kind::kJigsawToxic: return "jigsaw_toxic";
    case Kind::kCustom: return custom_name;
  }
  return custom_name;
}

SamplingError::SamplingError(Stratum stratum, std::size_t requested, std::size_t available)
    : std::runtime_error("insufficient population in stratum " + std::string(to_string(stratum)) +
                         ": requested " + std::to_string(requested) + ", available " +
                         std::to_string(available) + " (short by " +
                         std::to_string(requested - available) + ")"),
      stratum_(stratum),
      shortfall_(requested - available) {}

namespace {

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); });
}

void validate(const LabeledSentence& s) {
  if (s.id.empty()) throw CorpusError("sentence has an empty id");
  if (is_blank(s.text)) throw CorpusError("sentence '" + s.id + "' has blank text");
  if (s.token_count < 1) throw CorpusError("sentence '" + s.id + "' has token_count < 1");
  if (s.label == Label::kNonHarmful && s.harm_type != HarmType::kNotApplicable) {
    throw CorpusError("non-harmful sentence '" + s.id + "' must have harm_type not_applicable");
  }
  if (s.label == Label::kHarmful && s.harm_type == HarmType::kNotApplicable) {
    throw CorpusError("harmful sentence '" + s.id + "' needs harm_type explicit or implicit");
  }
}

}  // namespace

CorpusStats corpus_stats(std::span<const LabeledSentence> sentences) {
  CorpusStats stats;
  double token_sum = 0.0;
  for (const auto& s : sentences) {
    ++stats.total;
    token_sum += s.token_count;
    stats.max_token_count = std::max(stats.max_token_count, s.token_count);
    if (s.harmful()) {
      ++stats.harmful;
      stats.max_harmful_token_count = std::max(stats.max_harmful_token_count, s.token_count);
      if (s.harm_type == HarmType::kImplicit) {
        ++stats.harmful_implicit;
      } else {
        ++stats.harmful_explicit;
      }
    } else {
      ++stats.non_harmful;
    }
  }
  if (stats.total > 0) {
    stats.harmful_fraction = static_cast<double>(stats.harmful) / static_cast<double>(stats.total);
    stats.mean_token_count = token_sum / static_cast<double>(stats.total);
  }
  if (stats.harmful > 0) {
    stats.implicit_fraction_of_harmful =
        static_cast<double>(stats.harmful_implicit) / static_cast<double>(stats.harmful);
  }
  return stats;
}

SentencePool::SentencePool(std::vector<LabeledSentence> sentences)
    : sentences_(std::move(sentences)) {
  if (sentences_.empty()) throw CorpusError("sentence pool is empty");
  for (std::size_t i = 0; i < sentences_.size(); ++i) {
    const auto& s = sentences_[i];
    validate(s);
    if (!s.harmful()) {
      non_harmful_.push_back(i);
    } else {
      harmful_any_.push_back(i);
      (s.harm_type == HarmType::kExplicit ? explicit_ : implicit_).push_back(i);
    }
  }
  by_id_.resize(sentences_.size());
  for (std::size_t i = 0; i < by_id_.size(); ++i) by_id_[i] = i;
  std::sort(by_id_.begin(), by_id_.end(),
            [&](std::size_t a, std::size_t b) { return sentences_[a].id < sentences_[b].id; });
  for (std::size_t i = 1; i < by_id_.size(); ++i) {
    if (sentences_[by_id_[i]].id == sentences_[by_id_[i - 1]].id) {
      throw CorpusError("duplicate sentence id '" + sentences_[by_id_[i]].id + "'");
    }
  }
  stats_ = corpus_stats(sentences_);
}

std::span<const std::size_t> SentencePool::stratum(Stratum which) const {
  switch (which) {
    case Stratum::kHarmfulExplicit: return explicit_;
    case Stratum::kHarmfulImplicit: return implicit_;
    case Stratum::kHarmfulAny: return harmful_any_;
    case Stratum::kNonHarmful: return non_harmful_;
  }
  return non_harmful_;
}

std::optional<std::size_t> SentencePool::find(std::string_view id) const {
  auto it = std::lower_bound(by_id_.begin(), by_id_.end(), id, [&](std::size_t pos, std::string_view key) {
    return sentences_[pos].id < key;
  });
  if (it == by_id_.end() || sentences_[*it].id != id) return std::nullopt;
  return *it;
}

namespace {

LabeledSentence parse_record(const std::string& line, std::size_t line_no, const Dataset& dataset,
                             const TokenCounter& tokenizer) {
  const auto fail = [&](const std::string& what) -> CorpusError {
    return CorpusError("line " + std::to_string(line_no) + ": " + what);
  };
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw fail(std::string("malformed JSON: ") + e.what());
  }
  if (!record.is_object()) throw fail("record is not a JSON object");

  LabeledSentence s;
  s.dataset = dataset;
  try {
    if (!record.contains("text") || !record["text"].is_string()) throw fail("missing string field 'text'");
    s.text = record["text"].get<std::string>();
    if (!record.contains("label") || !record["label"].is_string()) throw fail("missing string field 'label'");
    s.label = parse_label(record["label"].get<std::string>());

    if (record.contains("harm_type") && !record["harm_type"].is_null()) {
      if (!record["harm_type"].is_string()) throw fail("field 'harm_type' must be a string");
      s.harm_type = parse_harm_type(record["harm_type"].get<std::string>());
    } else if (s.label == Label::kHarmful) {
      throw fail("harmful record without harm_type");
    }

    if (record.contains("id") && !record["id"].is_null()) {
      const auto& id = record["id"];
      s.id = id.is_string() ? id.get<std::string>() : id.dump();
    } else {
      s.id = dataset.name() + ":" + std::to_string(line_no);
    }

    if (record.contains("token_count") && !record["token_count"].is_null()) {
      if (!record["token_count"].is_number_integer()) throw fail("field 'token_count' must be an integer");
      s.token_count = record["token_count"].get<int>();
    } else {
      s.token_count = tokenizer.count(s.text);
    }
    validate(s);
  } catch (const CorpusError& e) {
    const std::string what = e.what();
    if (what.rfind("line ", 0) == 0) throw;
    throw fail(what);
  }
  return s;
}

}  // namespace

SentencePool parse_corpus(std::string_view jsonl, const Dataset& dataset, const TokenCounter& tokenizer) {
  std::vector<LabeledSentence> sentences;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    sentences.push_back(parse_record(line, line_no, dataset, tokenizer));
  }
  if (sentences.empty()) throw CorpusError("corpus contains no records");
  return SentencePool(std::move(sentences));
}

SentencePool load_corpus(const std::filesystem::path& path, const Dataset& dataset,
                         const TokenCounter& tokenizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_corpus(buffer.str(), dataset, tokenizer);
  } catch (const CorpusError& e) {
    throw CorpusError(path.string() + ": " + e.what());
  }
}

void write_pool_cache(const SentencePool& pool, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write pool cache '" + path.string() + "'");
  for (const auto& s : pool.sentences()) {
    json record = {{"id", s.id},
                   {"text", s.text},
                   {"label", to_string(s.label)},
                   {"harm_type", to_string(s.harm_type)},
                   {"dataset", s.dataset.name()},
                   {"token_count", s.token_count}};
    out << record.dump() << '\n';
  }
  if (!out) throw CorpusError("failed while writing pool cache '" + path.string() + "'");
}

StratumDraw::StratumDraw(const SentencePool& pool, Stratum stratum, Rng& rng)
    : pool_(pool), stratum_(stratum), rng_(rng) {
  const auto members = pool.stratum(stratum);
  order_.assign(members.begin(), members.end());
}

const LabeledSentence* StratumDraw::next() {
  if (drawn_ >= order_.size()) return nullptr;
  // One step of a forward Fisher-Yates shuffle.
  const auto j = drawn_ + static_cast<std::size_t>(rng_.below(order_.size() - drawn_));
  std::swap(order_[drawn_], order_[j]);
  return &pool_.at(order_[drawn_++]);
}

std::vector<LabeledSentence> sample_stratum(const SentencePool& pool, Stratum stratum, std::size_t count,
                                            Rng& rng) {
  const auto available = pool.stratum(stratum).size();
  if (count > available) throw SamplingError(stratum, count, available);
  StratumDraw draw(pool, stratum, rng);
  std::vector<LabeledSentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(*draw.next());
  return out;
}

}  // namespace harmscope
