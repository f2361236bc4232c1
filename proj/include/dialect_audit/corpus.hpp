#pragma once

// Message ingestion: preprocessing, tokenization, length binning and
// stratified sampling of group-aligned messages.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dialect_audit/error.hpp"
#include "dialect_audit/random.hpp"
#include "dialect_audit/utf8.hpp"

namespace dialect_audit {

enum class Group { none, AA, WH };

inline std::string_view to_string(Group g) {
  switch (g) {
    case Group::AA: return "AA";
    case Group::WH: return "WH";
    default: return "none";
  }
}

inline std::optional<Group> parse_group(std::string_view s) {
  if (s == "AA") return Group::AA;
  if (s == "WH") return Group::WH;
  if (s == "none" || s.empty()) return Group::none;
  return std::nullopt;
}

// Census covariates in fixed order.
enum class Demographic : std::size_t { white = 0, black = 1, hispanic = 2, asian = 3 };
inline constexpr std::size_t kNumDemographics = 4;
inline constexpr std::array<std::string_view, kNumDemographics> kDemographicNames = {
    "white", "black", "hispanic", "asian"};

// Topic index carrying a group's alignment score.
inline std::size_t topic_of(Group g) {
  if (g == Group::AA) return static_cast<std::size_t>(Demographic::black);
  if (g == Group::WH) return static_cast<std::size_t>(Demographic::white);
  throw ArgumentError("group must be AA or WH");
}

// Per-author probability vector over (white, black, hispanic, asian).
struct DemographicPrior {
  std::array<double, kNumDemographics> weights{};

  static constexpr double kSimplexTolerance = 1e-6;

  // Accepts any vector of four weights in [0,1] summing to 1 within
  // `tolerance` and renormalizes it exactly onto the simplex.
  static DemographicPrior from_weights(const std::vector<double>& w, double tolerance = 1e-3) {
    if (w.size() != kNumDemographics) {
      throw DataError("prior must have 4 components, got " + std::to_string(w.size()));
    }
    double sum = 0.0;
    for (double x : w) {
      if (!std::isfinite(x) || x < 0.0 || x > 1.0) throw DataError("prior not a simplex");
      sum += x;
    }
    if (std::abs(sum - 1.0) > tolerance) throw DataError("prior not a simplex");
    DemographicPrior p;
    for (std::size_t k = 0; k < kNumDemographics; ++k) p.weights[k] = w[k] / sum;
    return p;
  }

  double operator[](std::size_t k) const { return weights[k]; }
};

struct Message {
  std::string id;
  std::string raw_text;
  std::string clean_text;
  std::vector<std::string> tokens;
  std::string author_id;
  std::optional<DemographicPrior> prior;
  std::optional<std::string> gold_language;
  Group group = Group::none;
  // Precomputed topic proportions shipped with a corpus, if any.
  std::optional<std::array<double, kNumDemographics>> proportions;
};

struct LengthBin {
  int index = 0;                // 1-based
  int lower = 0;                // exclusive
  std::optional<int> upper;     // inclusive; nullopt means unbounded

  bool contains(std::size_t t) const {
    return static_cast<long long>(t) > lower && (!upper || static_cast<long long>(t) <= *upper);
  }

  std::string label() const {
    if (lower == 0) return "t <= " + std::to_string(*upper);
    if (!upper) return "t > " + std::to_string(lower);
    return std::to_string(lower) + " < t <= " + std::to_string(*upper);
  }

  friend bool operator==(const LengthBin&, const LengthBin&) = default;
};

// Partition of positive message lengths by upper edges. The default edges
// {5, 10, 15} give the bins (0,5], (5,10], (10,15], (15,inf).
class BinScheme {
 public:
  BinScheme() : BinScheme(std::vector<int>{5, 10, 15}) {}

  explicit BinScheme(std::vector<int> edges) : edges_(std::move(edges)) {
    int prev = 0;
    for (int e : edges_) {
      if (e <= prev) throw ArgumentError("bin edges must be positive and strictly increasing");
      prev = e;
    }
  }

  std::size_t size() const { return edges_.size() + 1; }
  const std::vector<int>& edges() const { return edges_; }

  LengthBin bin(int index) const {
    if (index < 1 || index > static_cast<int>(size())) {
      throw ArgumentError("no length bin " + std::to_string(index));
    }
    const auto i = static_cast<std::size_t>(index - 1);
    LengthBin b;
    b.index = index;
    b.lower = i == 0 ? 0 : edges_[i - 1];
    if (i < edges_.size()) b.upper = edges_[i];
    return b;
  }

  std::vector<LengthBin> bins() const {
    std::vector<LengthBin> out;
    for (int i = 1; i <= static_cast<int>(size()); ++i) out.push_back(bin(i));
    return out;
  }

  int index_of(std::size_t token_count) const {
    if (token_count == 0) throw DataError("unbinnable empty message");
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      if (token_count <= static_cast<std::size_t>(edges_[i])) return static_cast<int>(i + 1);
    }
    return static_cast<int>(size());
  }

 private:
  std::vector<int> edges_;
};

inline int length_bin(std::size_t token_count) {
  static const BinScheme scheme;
  return scheme.index_of(token_count);
}

namespace detail {

inline std::optional<char32_t> named_entity(std::string_view name) {
  if (name == "amp") return U'&';
  if (name == "lt") return U'<';
  if (name == "gt") return U'>';
  if (name == "quot") return U'"';
  if (name == "apos") return U'\'';
  if (name == "nbsp") return U'\u00A0';
  return std::nullopt;
}

inline std::optional<char32_t> numeric_entity(std::string_view body) {
  int base = 10;
  if (!body.empty() && (body.front() == 'x' || body.front() == 'X')) {
    base = 16;
    body.remove_prefix(1);
  }
  if (body.empty() || body.size() > 8) return std::nullopt;
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value, base);
  if (ec != std::errc() || ptr != body.data() + body.size()) return std::nullopt;
  if (value == 0 || !utf8::is_scalar_value(value)) return std::nullopt;
  return static_cast<char32_t>(value);
}

// One left-to-right pass of entity decoding; unknown entities are copied.
inline std::string decode_entities_once(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '&') {
      const std::size_t semi = s.find(';', i + 1);
      if (semi != std::string_view::npos && semi - i <= 12) {
        const std::string_view name = s.substr(i + 1, semi - i - 1);
        std::optional<char32_t> cp;
        if (!name.empty() && name.front() == '#') {
          cp = numeric_entity(name.substr(1));
        } else {
          cp = named_entity(name);
        }
        if (cp) {
          utf8::append(out, *cp);
          i = semi + 1;
          continue;
        }
      }
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const char c = s[i] >= 'A' && s[i] <= 'Z' ? static_cast<char>(s[i] - 'A' + 'a') : s[i];
    if (c != prefix[i]) return false;
  }
  return true;
}

inline bool is_url_token(std::string_view token) {
  return starts_with_icase(token, "http://") || starts_with_icase(token, "https://") ||
         starts_with_icase(token, "t.co/");
}

struct Run {
  std::string_view text;
  bool space;
};

// Splits into maximal alternating whitespace / non-whitespace runs.
inline std::vector<Run> split_runs(std::string_view s) {
  std::vector<Run> runs;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t start = i;
    const bool space = utf8::space_at(s, i) > 0;
    while (i < s.size()) {
      const std::size_t w = utf8::space_at(s, i);
      if ((w > 0) != space) break;
      i += w > 0 ? w : utf8::decode(s, i).len;
    }
    runs.push_back({s.substr(start, i - start), space});
  }
  return runs;
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  while (b < s.size()) {
    const std::size_t w = utf8::space_at(s, b);
    if (w == 0) break;
    b += w;
  }
  std::size_t e = s.size();
  while (e > b) {
    // step back to the start of the previous code point
    std::size_t p = e - 1;
    while (p > b && (static_cast<unsigned char>(s[p]) & 0xC0) == 0x80) --p;
    const std::size_t w = utf8::space_at(s, p);
    if (w == 0 || p + w != e) break;
    e = p;
  }
  return s.substr(b, e - b);
}

}  // namespace detail

// Resolves HTML entities (to a fixed point, so double-escaped text is fully
// decoded), removes whitespace-bounded URL tokens, and trims. Whitespace
// around each removed URL collapses to one space; all other text, including
// @-mentions, emoji and hashtags, is kept verbatim.
inline std::string preprocess(std::string_view raw_text) {
  std::string decoded(raw_text);
  for (;;) {
    std::string next = detail::decode_entities_once(decoded);
    if (next == decoded) break;
    decoded = std::move(next);
  }

  const auto runs = detail::split_runs(decoded);
  std::string out;
  out.reserve(decoded.size());
  std::size_t i = 0;
  while (i < runs.size()) {
    if (!runs[i].space && detail::is_url_token(runs[i].text)) {
      // swallow the URL with its neighbouring whitespace and further URLs
      if (!out.empty() && i > 0 && runs[i - 1].space) {
        out.resize(out.size() - runs[i - 1].text.size());
      }
      std::size_t j = i + 1;
      while (j < runs.size() &&
             (runs[j].space || detail::is_url_token(runs[j].text))) {
        ++j;
      }
      out.push_back(' ');
      i = j;
      continue;
    }
    out.append(runs[i].text);
    ++i;
  }
  return std::string(detail::trim(out));
}

inline std::vector<std::string> tokenize(std::string_view clean_text) {
  std::vector<std::string> tokens;
  for (const auto& run : detail::split_runs(clean_text)) {
    if (!run.space) tokens.emplace_back(run.text);
  }
  return tokens;
}

inline Message make_message(std::string id, std::string raw_text, std::string author = {}) {
  Message m;
  m.id = std::move(id);
  m.raw_text = std::move(raw_text);
  m.clean_text = preprocess(m.raw_text);
  m.tokens = tokenize(m.clean_text);
  m.author_id = std::move(author);
  return m;
}

struct Corpus {
  std::vector<Message> messages;
  std::string source_path;
  std::string format_version = "1";
  std::vector<std::string> diagnostics;  // non-fatal load warnings

  std::size_t size() const { return messages.size(); }

  std::size_t empty_count() const {
    return static_cast<std::size_t>(std::count_if(
        messages.begin(), messages.end(), [](const Message& m) { return m.tokens.empty(); }));
  }
};

enum class CorpusFormat { jsonl, tsv };

inline std::optional<CorpusFormat> parse_corpus_format(std::string_view s) {
  if (s == "jsonl") return CorpusFormat::jsonl;
  if (s == "tsv") return CorpusFormat::tsv;
  return std::nullopt;
}

struct LoadOptions {
  bool dedupe = false;
  // When false, invalid records are skipped and listed in diagnostics
  // instead of failing the load.
  bool strict = true;
};

namespace detail {

inline std::vector<double> parse_decimal_list(std::string_view s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = std::min(s.find(',', pos), s.size());
    std::string_view field = s.substr(pos, comma - pos);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw DataError("malformed decimal '" + std::string(field) + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

inline Message message_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  if (!j.contains("id") || !j["id"].is_string()) throw DataError("missing string field 'id'");
  if (!j.contains("text") || !j["text"].is_string()) throw DataError("missing string field 'text'");
  std::string author;
  if (j.contains("author") && !j["author"].is_null()) {
    if (!j["author"].is_string()) throw DataError("field 'author' must be a string");
    author = j["author"].get<std::string>();
  }
  Message m = make_message(j["id"].get<std::string>(), j["text"].get<std::string>(), author);
  if (j.contains("prior") && !j["prior"].is_null()) {
    if (!j["prior"].is_array()) throw DataError("field 'prior' must be an array");
    std::vector<double> w;
    for (const auto& x : j["prior"]) {
      if (!x.is_number()) throw DataError("prior not a simplex");
      w.push_back(x.get<double>());
    }
    m.prior = DemographicPrior::from_weights(w);
  }
  if (j.contains("group") && !j["group"].is_null()) {
    const auto g = j["group"].is_string() ? parse_group(j["group"].get<std::string>()) : std::nullopt;
    if (!g) throw DataError("field 'group' must be \"AA\" or \"WH\"");
    m.group = *g;
  }
  if (j.contains("gold_lang") && !j["gold_lang"].is_null()) {
    if (!j["gold_lang"].is_string()) throw DataError("field 'gold_lang' must be a string");
    const auto lang = j["gold_lang"].get<std::string>();
    if (!lang.empty()) m.gold_language = lang;
  }
  if (j.contains("proportions") && !j["proportions"].is_null()) {
    const auto& p = j["proportions"];
    if (!p.is_array() || p.size() != kNumDemographics) {
      throw DataError("field 'proportions' must hold 4 numbers");
    }
    std::array<double, kNumDemographics> props{};
    for (std::size_t k = 0; k < kNumDemographics; ++k) props[k] = p[k].get<double>();
    m.proportions = props;
  }
  return m;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

inline Message message_from_tsv(std::string_view line) {
  const auto f = split_tabs(line);
  if (f.size() < 2 || f.size() > 6) {
    throw DataError("expected 2-6 tab-separated columns, got " + std::to_string(f.size()));
  }
  if (f[0].empty()) throw DataError("empty id");
  Message m = make_message(std::string(f[0]), std::string(f[1]),
                           f.size() > 2 ? std::string(f[2]) : std::string());
  if (f.size() > 3 && !f[3].empty()) m.prior = DemographicPrior::from_weights(parse_decimal_list(f[3]));
  if (f.size() > 4 && !f[4].empty()) {
    const auto g = parse_group(f[4]);
    if (!g) throw DataError("group must be AA or WH");
    m.group = *g;
  }
  if (f.size() > 5 && !f[5].empty()) m.gold_language = std::string(f[5]);
  return m;
}

}  // namespace detail

inline Corpus load_corpus(const std::string& path, CorpusFormat format, const LoadOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file " + path);

  Corpus corpus;
  corpus.source_path = path;
  std::vector<std::string> errors;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (format == CorpusFormat::tsv && lineno == 1 && line.rfind("id\t", 0) == 0) continue;
    try {
      Message m;
      if (format == CorpusFormat::jsonl) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
          throw DataError("malformed JSON");
        }
        m = detail::message_from_json(j);
      } else {
        m = detail::message_from_tsv(line);
      }
      if (!seen.insert(m.id).second) {
        if (opts.dedupe) {
          corpus.diagnostics.push_back("line " + std::to_string(lineno) + ": duplicate id '" + m.id +
                                       "' dropped");
          continue;
        }
        corpus.diagnostics.push_back("line " + std::to_string(lineno) + ": duplicate id '" + m.id +
                                     "' kept");
      }
      corpus.messages.push_back(std::move(m));
    } catch (const DataError& e) {
      errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }

  if (!errors.empty()) {
    if (opts.strict) {
      std::string msg = path + ": " + std::to_string(errors.size()) + " invalid record(s)";
      for (std::size_t i = 0; i < errors.size() && i < 20; ++i) msg += "\n  " + errors[i];
      throw DataError(msg);
    }
    for (auto& e : errors) corpus.diagnostics.push_back(std::move(e) + " (skipped)");
  }
  return corpus;
}

inline nlohmann::json message_to_json(const Message& m) {
  nlohmann::json j;
  j["id"] = m.id;
  j["text"] = m.clean_text;
  j["author"] = m.author_id;
  if (m.prior) j["prior"] = m.prior->weights;
  if (m.group != Group::none) j["group"] = std::string(to_string(m.group));
  if (m.gold_language) j["gold_lang"] = *m.gold_language;
  if (m.proportions) j["proportions"] = *m.proportions;
  return j;
}

// Writes the preprocessed corpus as JSONL. Reloading it yields the same
// clean texts because preprocess is idempotent.
inline void write_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& m : corpus.messages) out << message_to_json(m).dump() << '\n';
  if (!out) throw DataError("write failed for " + path);
}

// Messages of `group` whose token count falls in `bin`, in corpus order.
inline std::vector<const Message*> cell_members(const Corpus& corpus, Group group, const LengthBin& bin) {
  std::vector<const Message*> out;
  for (const auto& m : corpus.messages) {
    if (m.group == group && !m.tokens.empty() && bin.contains(m.tokens.size())) out.push_back(&m);
  }
  return out;
}

// Uniform sample without replacement from the (group, bin) cell via a
// partial Fisher-Yates shuffle. Output order is the sampling order.
inline Corpus stratified_sample(const Corpus& corpus, Group group, const LengthBin& bin, std::size_t n,
                                std::uint64_t seed) {
  if (group == Group::none) throw ArgumentError("sampling requires group AA or WH");
  if (n == 0) throw ArgumentError("sample size must be positive");
  auto pool = cell_members(corpus, group, bin);
  if (pool.size() < n) {
    throw DataError("cell (" + std::string(to_string(group)) + ", bin " + std::to_string(bin.index) +
                    " " + bin.label() + ") has " + std::to_string(pool.size()) +
                    " messages, need " + std::to_string(n));
  }
  Rng rng(seed);
  Corpus out;
  out.source_path = corpus.source_path;
  out.format_version = corpus.format_version;
  out.messages.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    out.messages.push_back(*pool[i]);
  }
  return out;
}

}  // namespace dialect_audit
