#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dialect_audit/audit.hpp"

namespace dialect_audit::testing {

// Published accuracies in tenths of a percent, per (system, bin).
struct PublishedRow {
  std::string system;
  int bin;
  int aa_tenths;
  int wh_tenths;
  std::string expected;  // "AA | WH | Diff" as printed

  std::string bin_label() const { return BinScheme().bin(bin).label(); }
};

inline const std::vector<PublishedRow>& published_table() {
  static const std::vector<PublishedRow> rows = {
      {"langid.py", 1, 680, 708, "68.0 | 70.8 | 2.8"},  {"langid.py", 2, 846, 916, "84.6 | 91.6 | 7.0"},
      {"langid.py", 3, 930, 980, "93.0 | 98.0 | 5.0"},  {"langid.py", 4, 962, 998, "96.2 | 99.8 | 3.6"},
      {"IBM Watson", 1, 628, 779, "62.8 | 77.9 | 15.1"}, {"IBM Watson", 2, 919, 957, "91.9 | 95.7 | 3.8"},
      {"IBM Watson", 3, 964, 990, "96.4 | 99.0 | 2.6"}, {"IBM Watson", 4, 980, 996, "98.0 | 99.6 | 1.6"},
      {"Microsoft Azure", 1, 876, 942, "87.6 | 94.2 | 6.6"}, {"Microsoft Azure", 2, 985, 996, "98.5 | 99.6 | 1.1"},
      {"Microsoft Azure", 3, 996, 999, "99.6 | 99.9 | 0.3"}, {"Microsoft Azure", 4, 995, 999, "99.5 | 99.9 | 0.4"},
      {"Twitter", 1, 540, 737, "54.0 | 73.7 | 19.7"},   {"Twitter", 2, 875, 915, "87.5 | 91.5 | 4.0"},
      {"Twitter", 3, 957, 960, "95.7 | 96.0 | 0.3"},    {"Twitter", 4, 985, 951, "98.5 | 95.1 | -3.0"},
  };
  return rows;
}

// English count out of 2500 for a percentage given in tenths; x.y% of 2500
// is 2.5 * tenths, halves rounded up.
inline std::int64_t published_count(int tenths) { return (static_cast<std::int64_t>(tenths) * 5 + 1) / 2; }

inline audit::CellResult published_cell(const std::string& system, int bin, Group g, int tenths) {
  audit::CellResult c;
  c.system = system;
  c.group = g;
  c.bin = BinScheme().bin(bin);
  c.n = 2500;
  c.n_english = c.n_correct = published_count(tenths);
  return c;
}

inline std::vector<audit::CellResult> published_cells() {
  std::vector<audit::CellResult> cells;
  for (const auto& r : published_table()) {
    cells.push_back(published_cell(r.system, r.bin, Group::AA, r.aa_tenths));
    cells.push_back(published_cell(r.system, r.bin, Group::WH, r.wh_tenths));
  }
  return cells;
}

}  // namespace dialect_audit::testing
