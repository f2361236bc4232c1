#pragma once

// Character (byte) n-gram multinomial naive-Bayes language identifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dialect_audit/error.hpp"

namespace dialect_audit::langid {

struct LangIdConfig {
  int ngram_min = 1;
  int ngram_max = 4;
  double smoothing = 1.0;
  std::optional<std::size_t> max_features;
  bool use_priors = false;

  void validate() const {
    if (ngram_min < 1 || ngram_min > ngram_max || ngram_max > 8) {
      throw ArgumentError("n-gram range must satisfy 1 <= min <= max <= 8");
    }
    if (!(smoothing > 0.0) || !std::isfinite(smoothing)) throw ArgumentError("smoothing must be positive");
    if (max_features && *max_features == 0) throw ArgumentError("max_features must be positive");
  }
};

// Sorted multiset of byte n-grams.
using FeatureCounts = std::map<std::string, std::uint32_t>;

inline FeatureCounts extract_features(std::string_view text, const LangIdConfig& config) {
  FeatureCounts out;
  for (int n = config.ngram_min; n <= config.ngram_max; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (text.size() < un) break;
    for (std::size_t i = 0; i + un <= text.size(); ++i) ++out[std::string(text.substr(i, un))];
  }
  return out;
}

struct LabeledDoc {
  std::string text;
  std::string language;
};

class LangIdModel {
 public:
  static constexpr std::string_view kVersion = "1";

  LangIdModel(std::vector<std::string> languages, std::vector<std::string> features,
              std::vector<double> log_probs, std::vector<double> log_priors, LangIdConfig config)
      : languages_(std::move(languages)),
        features_(std::move(features)),
        log_probs_(std::move(log_probs)),
        log_priors_(std::move(log_priors)),
        config_(std::move(config)) {
    if (log_probs_.size() != features_.size() * languages_.size() ||
        log_priors_.size() != languages_.size()) {
      throw DataError("language model tables have inconsistent shapes");
    }
    if (!std::is_sorted(languages_.begin(), languages_.end())) throw DataError("languages must be sorted");
    index_.reserve(features_.size());
    for (std::size_t i = 0; i < features_.size(); ++i) index_.emplace(features_[i], i);
  }

  const std::vector<std::string>& languages() const { return languages_; }
  const std::vector<std::string>& features() const { return features_; }
  const std::vector<double>& log_priors() const { return log_priors_; }
  const LangIdConfig& config() const { return config_; }
  std::size_t num_features() const { return features_.size(); }

  std::optional<std::size_t> feature_index(const std::string& ngram) const {
    const auto it = index_.find(ngram);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // log p(feature | language), indexed [feature][language].
  double log_prob(std::size_t feature, std::size_t language) const {
    return log_probs_[feature * languages_.size() + language];
  }

 private:
  std::vector<std::string> languages_;
  std::vector<std::string> features_;  // sorted
  std::vector<double> log_probs_;
  std::vector<double> log_priors_;
  LangIdConfig config_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline LangIdModel train(const std::vector<LabeledDoc>& docs, const LangIdConfig& config = {}) {
  config.validate();
  std::map<std::string, std::size_t> doc_counts;
  for (const auto& d : docs) {
    if (d.language.empty()) throw DataError("training document without a language");
    ++doc_counts[d.language];
  }
  if (doc_counts.size() < 2) throw DataError("training needs at least two languages");

  std::vector<std::string> languages;
  std::map<std::string, std::size_t> lang_index;
  for (const auto& [lang, n] : doc_counts) {
    lang_index[lang] = languages.size();
    languages.push_back(lang);
  }
  const std::size_t L = languages.size();

  // feature -> per-language counts
  std::map<std::string, std::vector<double>> counts;
  for (const auto& d : docs) {
    const std::size_t li = lang_index[d.language];
    for (const auto& [g, c] : extract_features(d.text, config)) {
      auto& row = counts[g];
      if (row.empty()) row.assign(L, 0.0);
      row[li] += c;
    }
  }

  if (config.max_features && counts.size() > *config.max_features) {
    std::vector<std::pair<double, const std::string*>> ranked;
    for (const auto& [g, row] : counts) {
      double total = 0.0;
      for (double c : row) total += c;
      ranked.emplace_back(total, &g);
    }
    // most frequent first, ties by n-gram
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::map<std::string, std::vector<double>> kept;
    for (std::size_t i = 0; i < *config.max_features; ++i) kept.emplace(*ranked[i].second, counts[*ranked[i].second]);
    counts = std::move(kept);
  }

  const auto F = static_cast<double>(counts.size());
  std::vector<double> totals(L, 0.0);
  for (const auto& [g, row] : counts) {
    for (std::size_t l = 0; l < L; ++l) totals[l] += row[l];
  }

  std::vector<std::string> features;
  std::vector<double> log_probs;
  features.reserve(counts.size());
  log_probs.reserve(counts.size() * L);
  for (const auto& [g, row] : counts) {
    features.push_back(g);
    for (std::size_t l = 0; l < L; ++l) {
      log_probs.push_back(std::log((row[l] + config.smoothing) / (totals[l] + config.smoothing * F)));
    }
  }

  std::vector<double> log_priors(L);
  const auto n_docs = static_cast<double>(docs.size());
  for (std::size_t l = 0; l < L; ++l) {
    log_priors[l] = config.use_priors ? std::log(static_cast<double>(doc_counts[languages[l]]) / n_docs)
                                      : -std::log(static_cast<double>(L));
  }
  return LangIdModel(std::move(languages), std::move(features), std::move(log_probs), std::move(log_priors),
                     config);
}

struct Prediction {
  std::string language;
  double confidence = 0.0;
  std::vector<double> scores;  // aligned with model.languages()
  bool degenerate = false;     // no known n-grams in the text
};

// Per-language unnormalized log score; features summed in sorted n-gram order.
inline std::vector<double> log_scores(const LangIdModel& model, const FeatureCounts& features,
                                      std::size_t* known = nullptr) {
  const std::size_t L = model.languages().size();
  std::vector<double> s(model.log_priors());
  std::size_t hits = 0;
  for (const auto& [g, c] : features) {
    const auto f = model.feature_index(g);
    if (!f) continue;
    ++hits;
    for (std::size_t l = 0; l < L; ++l) s[l] += c * model.log_prob(*f, l);
  }
  if (known) *known = hits;
  return s;
}

inline Prediction classify(const LangIdModel& model, std::string_view text) {
  if (text.empty()) throw DataError("unclassifiable empty message");
  const std::size_t L = model.languages().size();
  std::size_t known = 0;
  const auto s = log_scores(model, extract_features(text, model.config()), &known);

  Prediction p;
  if (known == 0) {
    p.degenerate = true;
    p.scores.assign(L, 1.0 / static_cast<double>(L));
  } else {
    const double top = *std::max_element(s.begin(), s.end());
    p.scores.resize(L);
    double z = 0.0;
    for (std::size_t l = 0; l < L; ++l) z += p.scores[l] = std::exp(s[l] - top);
    for (double& x : p.scores) x /= z;
  }
  // first maximum wins, i.e. the lexicographically smallest code
  std::size_t best = 0;
  for (std::size_t l = 1; l < L; ++l) {
    if (p.scores[l] > p.scores[best]) best = l;
  }
  p.language = model.languages()[best];
  p.confidence = p.scores[best];
  return p;
}

// Top-1 English decision; a positive threshold also requires that confidence.
inline bool is_english(const Prediction& p, double threshold = 0.0) {
  if (threshold < 0.0 || threshold > 1.0) throw ArgumentError("threshold must lie in [0, 1]");
  return p.language == "en" && (threshold <= 0.0 || p.confidence >= threshold);
}

inline bool is_english(const LangIdModel& model, std::string_view text, double threshold = 0.0) {
  return is_english(classify(model, text), threshold);
}

// ---------------------------------------------------------------------------
// Serialization. N-grams are raw bytes, so printable ASCII is stored as is,
// backslash doubled, and every other byte as \xHH.

inline std::string escape_ngram(std::string_view g) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (char ch : g) {
    const auto b = static_cast<unsigned char>(ch);
    if (b == '\\') {
      out += "\\\\";
    } else if (b >= 0x20 && b < 0x7F) {
      out.push_back(ch);
    } else {
      out += "\\x";
      out.push_back(kHex[b >> 4]);
      out.push_back(kHex[b & 0xF]);
    }
  }
  return out;
}

inline std::string unescape_ngram(std::string_view s) {
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 1 < s.size() && s[i + 1] == '\\') {
      out.push_back('\\');
      ++i;
    } else if (i + 3 < s.size() && s[i + 1] == 'x' && hex(s[i + 2]) >= 0 && hex(s[i + 3]) >= 0) {
      out.push_back(static_cast<char>(hex(s[i + 2]) * 16 + hex(s[i + 3])));
      i += 3;
    } else {
      throw DataError("bad escape in n-gram '" + std::string(s) + "'");
    }
  }
  return out;
}

inline nlohmann::json to_json(const LangIdModel& model) {
  const auto& cfg = model.config();
  nlohmann::json j;
  j["format"] = "dialect-audit/langid-model";
  j["version"] = std::string(LangIdModel::kVersion);
  j["languages"] = model.languages();
  j["config"] = {{"ngram_min", cfg.ngram_min},
                 {"ngram_max", cfg.ngram_max},
                 {"smoothing", cfg.smoothing},
                 {"use_priors", cfg.use_priors}};
  if (cfg.max_features) j["config"]["max_features"] = *cfg.max_features;
  j["log_priors"] = model.log_priors();
  nlohmann::json ngrams = nlohmann::json::array();
  for (const auto& g : model.features()) ngrams.push_back(escape_ngram(g));
  j["ngrams"] = std::move(ngrams);
  nlohmann::json tables = nlohmann::json::object();
  for (std::size_t l = 0; l < model.languages().size(); ++l) {
    std::vector<double> col(model.num_features());
    for (std::size_t f = 0; f < model.num_features(); ++f) col[f] = model.log_prob(f, l);
    tables[model.languages()[l]] = std::move(col);
  }
  j["log_probs"] = std::move(tables);
  return j;
}

inline LangIdModel langid_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "dialect-audit/langid-model") {
      throw DataError("not a language-identification model file");
    }
    if (j.at("version").get<std::string>() != LangIdModel::kVersion) throw DataError("unsupported model version");
    LangIdConfig cfg;
    const auto& c = j.at("config");
    cfg.ngram_min = c.at("ngram_min").get<int>();
    cfg.ngram_max = c.at("ngram_max").get<int>();
    cfg.smoothing = c.at("smoothing").get<double>();
    cfg.use_priors = c.at("use_priors").get<bool>();
    if (c.contains("max_features")) cfg.max_features = c.at("max_features").get<std::size_t>();
    cfg.validate();
    auto languages = j.at("languages").get<std::vector<std::string>>();
    std::vector<std::string> features;
    for (const auto& g : j.at("ngrams")) features.push_back(unescape_ngram(g.get<std::string>()));
    if (!std::is_sorted(features.begin(), features.end())) throw DataError("n-gram table must be sorted");
    std::vector<double> log_probs(features.size() * languages.size());
    for (std::size_t l = 0; l < languages.size(); ++l) {
      const auto col = j.at("log_probs").at(languages[l]).get<std::vector<double>>();
      if (col.size() != features.size()) throw DataError("log-prob table for '" + languages[l] + "' has wrong size");
      for (std::size_t f = 0; f < features.size(); ++f) log_probs[f * languages.size() + l] = col[f];
    }
    return LangIdModel(std::move(languages), std::move(features), std::move(log_probs),
                       j.at("log_priors").get<std::vector<double>>(), cfg);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed language model: ") + e.what());
  }
}

inline void save_model(const LangIdModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << to_json(model).dump() << '\n';
}

inline LangIdModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read language model " + path);
  try {
    return langid_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed language model " + path + ": " + e.what());
  }
}

// Training corpus: JSONL lines {"text": str, "lang": str}.
inline std::vector<LabeledDoc> load_training_docs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read training corpus " + path);
  std::vector<LabeledDoc> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      docs.push_back({j.at("text").get<std::string>(), j.at("lang").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

}  // namespace dialect_audit::langid
