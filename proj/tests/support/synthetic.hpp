#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialect_audit/random.hpp"

namespace dialect_audit::testing {

// Two artificial languages built from disjoint-leaning syllable inventories,
// plus a dialect of the first in which a share of tokens is replaced through a
// fixed substitution table. Substitute forms never occur in training text.
struct SyntheticLanguages {
  std::vector<std::string> en_words;
  std::vector<std::string> da_words;
  std::vector<std::string> dialect_form;  // aligned with en_words
  std::vector<double> zipf;               // word weights, shared shape
  double zipf_total = 0.0;
};

inline std::string make_word(Rng& rng, const std::vector<std::string>& syllables) {
  std::string w;
  const std::size_t n = 1 + rng.below(3);
  for (std::size_t i = 0; i < n; ++i) w += syllables[rng.below(syllables.size())];
  return w;
}

inline SyntheticLanguages make_languages(std::uint64_t seed, std::size_t vocab = 400) {
  static const std::vector<std::string> en_syl = {"th", "e",  "a",  "in", "er", "an", "re", "on", "at", "nd",
                                                  "ti", "es", "or", "te", "of", "ed", "is", "it", "al", "ar",
                                                  "st", "to", "nt", "ng", "se", "ha", "ou", "le", "ve", "co",
                                                  "me", "wh", "ly", "ow", "ch", "y",  "ea", "ur", "gh", "o"};
  static const std::vector<std::string> da_syl = {"sk", "\xc3\xb8", "\xc3\xa6", "\xc3\xa5", "hv", "gj", "kk",
                                                  "ld", "ft", "je", "ik", "ke", "de", "og", "en", "et",
                                                  "af", "ti", "li", "he", "sj", "ej", "aa", "nn", "ge",
                                                  "r",  "st", "mm", "ds", "ve", "bl", "fr", "ig", "el"};
  // dialect forms draw on the second inventory's distinctive pieces but are
  // fresh strings never seen in training
  static const std::vector<std::string> dialect_syl = {"\xc3\xb8", "\xc3\xa6", "\xc3\xa5", "hv", "gj", "sj",
                                                       "kk", "ej", "aa", "nn", "mm", "ds"};
  Rng rng(seed);
  SyntheticLanguages L;
  std::set<std::string> seen;
  auto fresh = [&](const std::vector<std::string>& syl) {
    for (;;) {
      auto w = make_word(rng, syl);
      if (seen.insert(w).second) return w;
    }
  };
  for (std::size_t i = 0; i < vocab; ++i) L.en_words.push_back(fresh(en_syl));
  for (std::size_t i = 0; i < vocab; ++i) L.da_words.push_back(fresh(da_syl));
  for (std::size_t i = 0; i < vocab; ++i) {
    std::string w;
    do {
      w = fresh(dialect_syl);
    } while (w.size() < 3);
    L.dialect_form.push_back(w);
  }
  for (std::size_t i = 0; i < vocab; ++i) {
    L.zipf.push_back(1.0 / static_cast<double>(i + 1));
    L.zipf_total += L.zipf.back();
  }
  return L;
}

inline std::vector<std::size_t> draw_words(Rng& rng, const SyntheticLanguages& L, std::size_t n) {
  std::vector<std::size_t> out(n);
  for (auto& w : out) w = rng.discrete(L.zipf, L.zipf_total);
  return out;
}

inline std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
  return s;
}

// Training JSONL {text, lang}; `docs` per language.
inline void write_training(const SyntheticLanguages& L, const std::string& path, std::size_t docs, std::uint64_t seed) {
  Rng rng(seed);
  std::ofstream out(path, std::ios::binary);
  for (const char* lang : {"en", "da"}) {
    const auto& words = std::string(lang) == "en" ? L.en_words : L.da_words;
    for (std::size_t d = 0; d < docs; ++d) {
      std::vector<std::string> text;
      for (auto i : draw_words(rng, L, 5 + rng.below(20))) text.push_back(words[i]);
      out << nlohmann::json{{"text", join(text)}, {"lang", lang}}.dump() << "\n";
    }
  }
}

struct SyntheticBin {
  std::size_t min_len;
  std::size_t max_len;
};

// Group-labelled corpus: WH messages are plain first-language text, AA
// messages rewrite each token through the table with probability `rate`.
inline void write_dialect_corpus(const SyntheticLanguages& L, const std::string& path, std::size_t per_cell,
                                 double rate, std::uint64_t seed) {
  static const std::vector<SyntheticBin> bins = {{1, 5}, {6, 10}, {11, 15}, {16, 25}};
  Rng rng(seed);
  std::ofstream out(path, std::ios::binary);
  std::size_t id = 0;
  for (const char* group : {"AA", "WH"}) {
    const bool dialect = std::string(group) == "AA";
    for (const auto& b : bins) {
      for (std::size_t m = 0; m < per_cell; ++m) {
        const std::size_t len = b.min_len + rng.below(b.max_len - b.min_len + 1);
        std::vector<std::string> text;
        for (auto i : draw_words(rng, L, len)) {
          const bool rewrite = rng.uniform() < rate;
          text.push_back(dialect && rewrite ? L.dialect_form[i] : L.en_words[i]);
        }
        out << nlohmann::json{{"id", "s" + std::to_string(id++)}, {"text", join(text)}, {"group", group}}.dump()
            << "\n";
      }
    }
  }
}

}  // namespace dialect_audit::testing
