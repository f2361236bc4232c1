#pragma once

// Length-binned disparity audit: per-cell accuracies under the all-English
// gold assumption, accuracy differences and ratios between white- and
// AA-aligned cells, two-proportion significance tests, and Table-style
// renderings. Counts are the source of truth; every rendered percentage is
// rounded from an exact rational.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dialect_audit/adapters.hpp"
#include "dialect_audit/corpus.hpp"
#include "dialect_audit/error.hpp"
#include "dialect_audit/random.hpp"

namespace dialect_audit::audit {

struct CellResult {
  std::string system;
  Group group = Group::none;
  LengthBin bin;
  std::int64_t n = 0;
  std::int64_t n_english = 0;
  std::int64_t n_correct = 0;  // equals n_english unless gold labels override
  std::int64_t n_und = 0;

  double accuracy() const { return static_cast<double>(n_correct) / static_cast<double>(n); }
  double standard_error() const {
    const double a = accuracy();
    return std::sqrt(a * (1.0 - a) / static_cast<double>(n));
  }
};

struct DisparityResult {
  std::string system;
  LengthBin bin;
  std::int64_t k_aa = 0, n_aa = 0, k_wh = 0, n_wh = 0;
  double acc_aa = 0.0;
  double acc_wh = 0.0;
  double diff = 0.0;
  std::optional<double> ratio;  // nullopt when acc_wh = 0
  double p_value = 1.0;
};

// Accuracy difference, white-aligned minus AA-aligned. 0 is parity.
inline double disparity(double acc_wh, double acc_aa) { return acc_wh - acc_aa; }

// acc_aa / acc_wh, the disparate-impact ratio; undefined when acc_wh = 0.
inline std::optional<double> disparate_impact_ratio(double acc_aa, double acc_wh) {
  if (acc_wh == 0.0) return std::nullopt;
  return acc_aa / acc_wh;
}

// How much less often AA-aligned messages survive the English filter
// relative to white-aligned ones: 1 - acc_aa / acc_wh.
inline std::optional<double> relative_underrepresentation(double acc_aa, double acc_wh) {
  const auto r = disparate_impact_ratio(acc_aa, acc_wh);
  if (!r) return std::nullopt;
  return 1.0 - *r;
}

// Two-sided pooled two-proportion z-test.
inline double significance_test(std::int64_t k_aa, std::int64_t n_aa, std::int64_t k_wh, std::int64_t n_wh) {
  if (n_aa < 1 || n_wh < 1) throw ArgumentError("significance test needs n >= 1 in both groups");
  if (k_aa < 0 || k_aa > n_aa || k_wh < 0 || k_wh > n_wh) throw ArgumentError("success count outside [0, n]");
  const double p_aa = static_cast<double>(k_aa) / static_cast<double>(n_aa);
  const double p_wh = static_cast<double>(k_wh) / static_cast<double>(n_wh);
  const double pooled = static_cast<double>(k_aa + k_wh) / static_cast<double>(n_aa + n_wh);
  const double var = pooled * (1.0 - pooled) * (1.0 / static_cast<double>(n_aa) + 1.0 / static_cast<double>(n_wh));
  if (var <= 0.0) return 1.0;
  const double z = (p_wh - p_aa) / std::sqrt(var);
  return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Rendering helpers

// num/den as a percentage with one decimal, rounded half away from zero on
// the exact rational.
inline std::string render_percent(std::int64_t num, std::int64_t den) {
  if (den <= 0) throw ArgumentError("render_percent needs a positive denominator");
  const bool negative = num < 0;
  const auto mag = static_cast<std::uint64_t>(negative ? -num : num);
  const auto d = static_cast<std::uint64_t>(den);
  if (mag > UINT64_MAX / 2000) throw ArgumentError("counts too large to render exactly");
  const std::uint64_t tenths = (2000 * mag + d) / (2 * d);
  std::string out = negative && tenths != 0 ? "-" : "";
  out += std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
  return out;
}

inline std::string render_accuracy(const CellResult& c) { return render_percent(c.n_correct, c.n); }

// (k_wh/n_wh - k_aa/n_aa) rendered like render_percent.
inline std::string render_difference(std::int64_t k_aa, std::int64_t n_aa, std::int64_t k_wh, std::int64_t n_wh) {
  if (n_aa < 1 || n_wh < 1) throw ArgumentError("render_difference needs non-empty cells");
  if (n_aa > (INT64_MAX / 2000) / n_wh) throw ArgumentError("counts too large to render exactly");
  return render_percent(k_wh * n_aa - k_aa * n_wh, n_wh * n_aa);
}

// Whole-number percentage of a real value, e.g. 0.2673 -> "27%".
inline std::string render_whole_percent(double x) {
  return std::to_string(static_cast<long long>(std::round(x * 100.0))) + "%";
}

// ---------------------------------------------------------------------------
// Cell accounting

class PredictionIndex {
 public:
  explicit PredictionIndex(const std::vector<adapters::PredictionRecord>& records) {
    for (const auto& r : records) by_key_[r.system + '\t' + r.message_id] = &r;
  }

  const adapters::PredictionRecord* find(const std::string& system, const std::string& id) const {
    const auto it = by_key_.find(system + '\t' + id);
    return it == by_key_.end() ? nullptr : it->second;
  }

 private:
  std::unordered_map<std::string, const adapters::PredictionRecord*> by_key_;
};

// Scores `system` on the messages of `corpus` in (group, bin). A message is
// correct when predicted English, or when it matches the message's own gold
// label if one is present.
inline CellResult accuracy(const PredictionIndex& predictions, const std::string& system, Group group,
                           const LengthBin& bin, const Corpus& corpus) {
  CellResult c;
  c.system = system;
  c.group = group;
  c.bin = bin;
  std::vector<std::string> missing;
  for (const auto* m : cell_members(corpus, group, bin)) {
    const auto* p = predictions.find(system, m->id);
    if (!p) {
      missing.push_back(m->id);
      continue;
    }
    ++c.n;
    const bool english = p->language == "en";
    c.n_english += english;
    c.n_und += p->language == adapters::kUndetermined;
    c.n_correct += m->gold_language ? p->language == *m->gold_language : english;
  }
  if (!missing.empty()) {
    std::string msg = "system '" + system + "' has no prediction for " + std::to_string(missing.size()) +
                      " message(s) in cell (" + std::string(to_string(group)) + ", " + bin.label() + "):";
    for (const auto& id : missing) msg += " " + id;
    throw DataError(msg);
  }
  return c;
}

inline CellResult accuracy(const std::vector<adapters::PredictionRecord>& predictions, const std::string& system,
                           Group group, const LengthBin& bin, const Corpus& corpus) {
  return accuracy(PredictionIndex(predictions), system, group, bin, corpus);
}

// ---------------------------------------------------------------------------
// Reports

struct AuditReport {
  std::vector<CellResult> cells;
  std::vector<DisparityResult> disparities;
  std::map<std::string, std::int64_t> excluded_counts;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::string> warnings;
};

inline DisparityResult compare_cells(const CellResult& aa, const CellResult& wh) {
  DisparityResult d;
  d.system = aa.system;
  d.bin = aa.bin;
  d.k_aa = aa.n_correct;
  d.n_aa = aa.n;
  d.k_wh = wh.n_correct;
  d.n_wh = wh.n;
  d.acc_aa = aa.accuracy();
  d.acc_wh = wh.accuracy();
  d.diff = disparity(d.acc_wh, d.acc_aa);
  d.ratio = disparate_impact_ratio(d.acc_aa, d.acc_wh);
  d.p_value = significance_test(d.k_aa, d.n_aa, d.k_wh, d.n_wh);
  return d;
}

// Orders cells by system (first appearance), bin, then group (AA first) and
// pairs up every (system, bin) that has both groups.
inline AuditReport build_report(std::vector<CellResult> cells, nlohmann::json metadata = nlohmann::json::object(),
                                std::map<std::string, std::int64_t> excluded = {}) {
  AuditReport r;
  r.metadata = std::move(metadata);
  r.excluded_counts = std::move(excluded);

  std::vector<std::string> systems;
  for (const auto& c : cells) {
    if (c.n <= 0) throw DataError("cell (" + c.system + ", " + std::string(to_string(c.group)) + ", " +
                                  c.bin.label() + ") is empty");
    if (std::find(systems.begin(), systems.end(), c.system) == systems.end()) systems.push_back(c.system);
  }
  auto rank = [&](const CellResult& c) {
    const auto s = std::find(systems.begin(), systems.end(), c.system) - systems.begin();
    return std::make_tuple(s, c.bin.index, c.group == Group::AA ? 0 : 1);
  };
  std::stable_sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });

  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const bool paired = i + 1 < cells.size() && cells[i + 1].system == c.system &&
                        cells[i + 1].bin.index == c.bin.index && c.group == Group::AA &&
                        cells[i + 1].group == Group::WH;
    if (paired) {
      r.disparities.push_back(compare_cells(c, cells[i + 1]));
      ++i;
    } else {
      r.warnings.push_back("cell (" + c.system + ", " + c.bin.label() + ") has only group " +
                           std::string(to_string(c.group)) + "; no disparity computed");
    }
  }
  r.cells = std::move(cells);
  return r;
}

struct TableRow {
  std::string system;
  std::string bin;
  std::string aa;
  std::string wh;
  std::string diff;

  std::string joined() const { return aa + " | " + wh + " | " + diff; }
};

inline std::vector<TableRow> table_rows(const AuditReport& r) {
  std::vector<TableRow> rows;
  for (const auto& d : r.disparities) {
    rows.push_back({d.system, d.bin.label(), render_percent(d.k_aa, d.n_aa), render_percent(d.k_wh, d.n_wh),
                    render_difference(d.k_aa, d.n_aa, d.k_wh, d.n_wh)});
  }
  return rows;
}

inline std::string format_p(double p) {
  std::ostringstream os;
  if (p < 1e-4) {
    os << "<0.0001";
  } else {
    os.setf(std::ios::fixed);
    os.precision(4);
    os << p;
  }
  return os.str();
}

// Markdown table laid out like the published accuracy table, followed by
// sample sizes and p-values.
inline std::string render_markdown(const AuditReport& r) {
  std::ostringstream os;
  os << "| System | Length | AA Acc. | WH Acc. | Diff. | n (AA/WH) | p |\n";
  os << "|---|---|---:|---:|---:|---:|---:|\n";
  const auto rows = table_rows(r);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& d = r.disparities[i];
    os << "| " << rows[i].system << " | " << rows[i].bin << " | " << rows[i].aa << " | " << rows[i].wh << " | "
       << rows[i].diff << " | " << d.n_aa << "/" << d.n_wh << " | " << format_p(d.p_value) << " |\n";
  }
  if (!r.excluded_counts.empty()) {
    os << "\nExcluded messages:";
    for (const auto& [reason, n] : r.excluded_counts) os << " " << reason << "=" << n;
    os << "\n";
  }
  bool any_und = false;
  for (const auto& c : r.cells) any_und |= c.n_und > 0;
  if (any_und) {
    os << "\nUndetermined (\"und\") predictions, counted as non-English:\n";
    for (const auto& c : r.cells) {
      if (c.n_und > 0) {
        os << "- " << c.system << " " << to_string(c.group) << " " << c.bin.label() << ": " << c.n_und << "/" << c.n
           << "\n";
      }
    }
  }
  for (const auto& w : r.warnings) os << "\nwarning: " << w << "\n";
  return os.str();
}

inline nlohmann::json bin_to_json(const LengthBin& b) {
  nlohmann::json j{{"index", b.index}, {"lower", b.lower}, {"label", b.label()}};
  j["upper"] = b.upper ? nlohmann::json(*b.upper) : nlohmann::json(nullptr);
  return j;
}

inline LengthBin bin_from_json(const nlohmann::json& j) {
  LengthBin b;
  b.index = j.at("index").get<int>();
  b.lower = j.at("lower").get<int>();
  if (!j.at("upper").is_null()) b.upper = j.at("upper").get<int>();
  return b;
}

inline nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json j;
  j["format"] = "dialect-audit/report";
  j["version"] = 1;
  j["metadata"] = r.metadata;
  j["excluded_counts"] = r.excluded_counts;
  j["warnings"] = r.warnings;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"system", c.system},
                     {"group", std::string(to_string(c.group))},
                     {"bin", bin_to_json(c.bin)},
                     {"n", c.n},
                     {"n_english", c.n_english},
                     {"n_correct", c.n_correct},
                     {"n_und", c.n_und},
                     {"accuracy", c.accuracy()},
                     {"stderr", c.standard_error()},
                     {"rendered", render_accuracy(c)}});
  }
  j["cells"] = std::move(cells);
  nlohmann::json disp = nlohmann::json::array();
  for (const auto& d : r.disparities) {
    nlohmann::json e{{"system", d.system},
                     {"bin", bin_to_json(d.bin)},
                     {"k_aa", d.k_aa},
                     {"n_aa", d.n_aa},
                     {"k_wh", d.k_wh},
                     {"n_wh", d.n_wh},
                     {"acc_aa", d.acc_aa},
                     {"acc_wh", d.acc_wh},
                     {"diff", d.diff},
                     {"p_value", d.p_value},
                     {"rendered_diff", render_difference(d.k_aa, d.n_aa, d.k_wh, d.n_wh)}};
    e["ratio"] = d.ratio ? nlohmann::json(*d.ratio) : nlohmann::json(nullptr);
    e["ratio_undefined"] = !d.ratio.has_value();
    e["relative_underrepresentation"] = d.ratio ? nlohmann::json(1.0 - *d.ratio) : nlohmann::json(nullptr);
    disp.push_back(std::move(e));
  }
  j["disparities"] = std::move(disp);
  return j;
}

// Rebuilds a report from its JSON form; statistics are recomputed from the
// stored counts.
inline AuditReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "dialect-audit/report") throw DataError("not an audit report");
    std::vector<CellResult> cells;
    for (const auto& c : j.at("cells")) {
      CellResult cell;
      cell.system = c.at("system").get<std::string>();
      const auto g = parse_group(c.at("group").get<std::string>());
      if (!g || *g == Group::none) throw DataError("bad group in report cell");
      cell.group = *g;
      cell.bin = bin_from_json(c.at("bin"));
      cell.n = c.at("n").get<std::int64_t>();
      cell.n_english = c.at("n_english").get<std::int64_t>();
      cell.n_correct = c.at("n_correct").get<std::int64_t>();
      cell.n_und = c.at("n_und").get<std::int64_t>();
      cells.push_back(std::move(cell));
    }
    auto excluded = j.value("excluded_counts", std::map<std::string, std::int64_t>{});
    return build_report(std::move(cells), j.value("metadata", nlohmann::json::object()), std::move(excluded));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed audit report: ") + e.what());
  }
}

// Bar-chart data: one line per (system, bin) with both groups' accuracies.
inline std::string chart_csv(const AuditReport& r) {
  std::ostringstream os;
  os << "system,bin,label,aa_accuracy,wh_accuracy,aa_stderr,wh_stderr\n";
  os.precision(17);
  for (const auto& d : r.disparities) {
    const double se_aa = std::sqrt(d.acc_aa * (1.0 - d.acc_aa) / static_cast<double>(d.n_aa));
    const double se_wh = std::sqrt(d.acc_wh * (1.0 - d.acc_wh) / static_cast<double>(d.n_wh));
    os << d.system << "," << d.bin.index << ",\"" << d.bin.label() << "\"," << d.acc_aa << "," << d.acc_wh << ","
       << se_aa << "," << se_wh << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// The sampling protocol: per (group, bin) cell, draw `sample_size` messages
// (0 keeps the whole cell), then score every system on the same sample.

struct AuditConfig {
  std::size_t sample_size = 2500;
  std::uint64_t seed = 1;
  BinScheme bins;
  std::vector<std::string> systems;  // empty: every system in the predictions
};

inline std::uint64_t cell_seed(std::uint64_t seed, Group g, int bin) {
  return mix_seed(seed, static_cast<std::uint64_t>(g == Group::AA ? 0 : 1) * 1000 + static_cast<std::uint64_t>(bin));
}

inline AuditReport run_audit(const Corpus& corpus, const std::vector<adapters::PredictionRecord>& predictions,
                             const AuditConfig& config, nlohmann::json metadata = nlohmann::json::object()) {
  std::map<std::string, std::int64_t> excluded;
  Corpus eligible;
  eligible.source_path = corpus.source_path;
  for (const auto& m : corpus.messages) {
    if (m.tokens.empty()) {
      ++excluded["empty_after_preprocessing"];
    } else if (m.group == Group::none) {
      ++excluded["unaligned"];
    } else {
      eligible.messages.push_back(m);
    }
  }

  std::vector<std::string> systems = config.systems;
  if (systems.empty()) {
    for (const auto& p : predictions) systems.push_back(p.system);
    std::sort(systems.begin(), systems.end());
    systems.erase(std::unique(systems.begin(), systems.end()), systems.end());
  }
  if (systems.empty()) throw DataError("no systems to audit");

  const PredictionIndex index(predictions);
  std::vector<CellResult> cells;
  for (const auto& bin : config.bins.bins()) {
    for (Group g : {Group::AA, Group::WH}) {
      const Corpus sample = config.sample_size == 0
                                ? eligible
                                : stratified_sample(eligible, g, bin, config.sample_size, cell_seed(config.seed, g, bin.index));
      for (const auto& system : systems) cells.push_back(accuracy(index, system, g, bin, sample));
    }
  }

  metadata["seed"] = config.seed;
  metadata["sample_size"] = config.sample_size;
  metadata["bin_edges"] = config.bins.edges();
  metadata["systems"] = systems;
  return build_report(std::move(cells), std::move(metadata), std::move(excluded));
}

}  // namespace dialect_audit::audit
