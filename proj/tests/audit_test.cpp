#include "dialect_audit/audit.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "support/published_table.hpp"

namespace dialect_audit::audit {
namespace {

using testing::published_table;
using testing::published_cells;
using testing::published_count;

CellResult cell(std::string system, int bin, Group g, std::int64_t n, std::int64_t k) {
  CellResult c;
  c.system = std::move(system);
  c.bin = BinScheme().bin(bin);
  c.group = g;
  c.n = n;
  c.n_english = c.n_correct = k;
  return c;
}

TEST(Cell, AccuracyAndStandardError) {
  const auto c = cell("s", 1, Group::AA, 2500, 1350);
  EXPECT_EQ(render_accuracy(c), "54.0");
  EXPECT_DOUBLE_EQ(c.accuracy(), 0.54);

  const auto full = cell("s", 1, Group::AA, 2500, 2500);
  EXPECT_EQ(render_accuracy(full), "100.0");
  EXPECT_EQ(full.standard_error(), 0.0);

  // sqrt(0.628 * 0.372 / 2500) = 0.0096668...
  const auto c628 = cell("s", 1, Group::AA, 2500, 1570);
  EXPECT_NEAR(c628.standard_error(), 0.0096668, 1e-7);
}

TEST(Statistics, Disparity) {
  EXPECT_NEAR(disparity(0.737, 0.540), 0.197, 1e-12);
  EXPECT_NEAR(disparity(0.951, 0.985), -0.034, 1e-12);
  for (double x : {0.0, 0.3, 1.0}) EXPECT_EQ(disparity(x, x), 0.0);
  for (double a : {0.1, 0.5, 0.93}) {
    for (double b : {0.0, 0.42, 1.0}) EXPECT_EQ(disparity(a, b), -disparity(b, a));
  }
}

TEST(Statistics, RatioAndRelative) {
  EXPECT_NEAR(*disparate_impact_ratio(0.540, 0.737), 0.73270013568521, 1e-12);
  EXPECT_EQ(*disparate_impact_ratio(0.6, 0.6), 1.0);
  EXPECT_EQ(*disparate_impact_ratio(0.0, 0.5), 0.0);
  EXPECT_FALSE(disparate_impact_ratio(0.3, 0.0).has_value());
  EXPECT_FALSE(relative_underrepresentation(0.3, 0.0).has_value());

  const double rel = *relative_underrepresentation(0.540, 0.737);
  EXPECT_NEAR(rel, 0.2673, 0.0005);
  EXPECT_EQ(render_whole_percent(rel), "27%");
  EXPECT_NEAR(*relative_underrepresentation(0.876, 0.942), 0.070, 0.0005);
  EXPECT_EQ(*relative_underrepresentation(0.8, 0.8), 0.0);
}

TEST(Statistics, Consistency) {
  for (double aa : {0.1, 0.54, 0.99}) {
    for (double wh : {0.2, 0.737, 1.0}) {
      const double rel = *relative_underrepresentation(aa, wh);
      EXPECT_NEAR(rel, 1.0 - *disparate_impact_ratio(aa, wh), 1e-12);
      EXPECT_NEAR(disparity(wh, aa), wh * rel, 1e-12);
    }
  }
}

TEST(Significance, Examples) {
  EXPECT_EQ(significance_test(1200, 2500, 1200, 2500), 1.0);
  EXPECT_EQ(significance_test(0, 10, 0, 30), 1.0);
  EXPECT_EQ(significance_test(10, 10, 30, 30), 1.0);
  EXPECT_LT(significance_test(1350, 2500, 1843, 2500), 0.01);
  const double p3 = significance_test(2393, 2500, 2400, 2500);
  EXPECT_GE(p3, 0.35);
  EXPECT_LE(p3, 0.65);
  // langid.py t <= 5, reported as p = .03
  EXPECT_NEAR(significance_test(1700, 2500, 1770, 2500), 0.03, 0.005);
}

TEST(Significance, SwapInvariantAndBounded) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const auto n1 = static_cast<std::int64_t>(1 + rng.below(300));
    const auto n2 = static_cast<std::int64_t>(1 + rng.below(300));
    const auto k1 = static_cast<std::int64_t>(rng.below(n1 + 1));
    const auto k2 = static_cast<std::int64_t>(rng.below(n2 + 1));
    const double p = significance_test(k1, n1, k2, n2);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_EQ(p, significance_test(k2, n2, k1, n1));
  }
  EXPECT_THROW(significance_test(1, 0, 1, 1), ArgumentError);
  EXPECT_THROW(significance_test(5, 4, 1, 1), ArgumentError);
}

TEST(Render, HalfAwayFromZero) {
  EXPECT_EQ(render_percent(1, 8), "12.5");
  EXPECT_EQ(render_percent(1, 16), "6.3");  // 6.25
  EXPECT_EQ(render_percent(-1, 16), "-6.3");
  EXPECT_EQ(render_percent(1, 3), "33.3");
  EXPECT_EQ(render_percent(2, 3), "66.7");
  EXPECT_EQ(render_percent(0, 7), "0.0");
  EXPECT_EQ(render_percent(-1, 100000), "0.0");
  EXPECT_EQ(render_percent(7, 25000), "0.0");  // 0.028
  EXPECT_EQ(render_percent(13, 10000), "0.1");  // 0.13
  EXPECT_THROW(render_percent(1, 0), ArgumentError);
  // difference rendered from exact counts, not from rendered accuracies
  EXPECT_EQ(render_difference(2393, 2500, 2400, 2500), "0.3");
  EXPECT_EQ(render_difference(1, 3, 2, 3), "33.3");
  EXPECT_EQ(render_difference(2, 3, 1, 3), "-33.3");
}

TEST(Render, PublishedRows) {
  const auto report = build_report(published_cells());
  const auto rows = table_rows(report);
  ASSERT_EQ(rows.size(), 16u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& want = published_table()[i];
    EXPECT_EQ(rows[i].system, want.system);
    if (want.system == "Twitter" && want.bin == 4) {
      // the printed -3.0 cannot be produced by any counts that give 98.5 and 95.1
      EXPECT_EQ(rows[i].joined(), "98.5 | 95.1 | -3.4");
    } else {
      EXPECT_EQ(rows[i].joined(), want.expected);
    }
  }
  EXPECT_EQ(rows[15].joined().substr(0, 11), "98.5 | 95.1");
  for (const auto& c : report.cells) {
    EXPECT_GE(c.standard_error(), 0.0004);
    EXPECT_LE(c.standard_error(), 0.0100);
  }
}

TEST(PublishedTable, CountsReproducePercentages) {
  EXPECT_EQ(published_count(540), 1350);
  EXPECT_EQ(published_count(737), 1843);
  EXPECT_EQ(published_count(957), 2393);
  for (const auto& r : published_table()) {
    EXPECT_EQ(render_percent(published_count(r.aa_tenths), 2500), r.expected.substr(0, r.expected.find(' ')));
  }
}

TEST(Report, Cardinality) {
  std::vector<CellResult> cells;
  for (const char* s : {"b", "a"}) {
    for (int bin = 4; bin >= 1; --bin) {
      cells.push_back(cell(s, bin, Group::WH, 100, 90));
      cells.push_back(cell(s, bin, Group::AA, 100, 80));
    }
  }
  const auto r = build_report(cells);
  ASSERT_EQ(r.disparities.size(), 8u);
  EXPECT_TRUE(r.warnings.empty());
  EXPECT_EQ(r.disparities[0].system, "b");
  EXPECT_EQ(r.disparities[0].bin.index, 1);
  EXPECT_NEAR(r.disparities[0].diff, 0.1, 1e-12);
  EXPECT_EQ(r.cells[0].group, Group::AA);
}

TEST(Report, SingleCellWarns) {
  const auto r = build_report({cell("s", 2, Group::AA, 10, 5)});
  EXPECT_TRUE(r.disparities.empty());
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("only group AA"), std::string::npos);
}

TEST(Report, UndefinedRatioIsFlagged) {
  const auto r = build_report({cell("s", 1, Group::AA, 10, 0), cell("s", 1, Group::WH, 10, 0)});
  EXPECT_FALSE(r.disparities[0].ratio.has_value());
  EXPECT_TRUE(to_json(r)["disparities"][0]["ratio_undefined"].get<bool>());
}

TEST(Report, JsonRoundTrip) {
  auto cells = published_cells();
  cells[0].n_und = 17;
  const auto r = build_report(cells, {{"seed", 3}}, {{"unaligned", 4}});
  const auto j = to_json(r);
  const auto back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
  const auto md = render_markdown(back);
  EXPECT_NE(md.find("| Twitter | t <= 5 | 54.0 | 73.7 | 19.7 |"), std::string::npos);
  EXPECT_NE(md.find("unaligned=4"), std::string::npos);
  EXPECT_NE(md.find("17/2500"), std::string::npos);
  EXPECT_THROW(report_from_json({{"format", "x"}}), DataError);
}

TEST(Report, ChartHasOneLinePerDisparity) {
  const auto csv = chart_csv(build_report(published_cells()));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
}

// ---------------------------------------------------------------------------

Corpus labelled_corpus() {
  Corpus c;
  int id = 0;
  for (Group g : {Group::AA, Group::WH}) {
    for (int len : {2, 7, 12, 20}) {
      for (int i = 0; i < 30; ++i) {
        std::string text;
        for (int t = 0; t < len; ++t) text += "w ";
        auto m = make_message(std::to_string(id++), text);
        m.group = g;
        c.messages.push_back(m);
      }
    }
  }
  c.messages.push_back(make_message("empty", "http://x.co"));
  c.messages.push_back(make_message("loose", "no group"));
  return c;
}

std::vector<adapters::PredictionRecord> predict(const Corpus& c, const std::string& system, int mod) {
  std::vector<adapters::PredictionRecord> out;
  for (const auto& m : c.messages) {
    const bool en = m.id == "empty" || m.id == "loose" || std::stoi(m.id) % mod != 0;
    out.push_back({m.id, system, en ? "en" : "und", std::nullopt, std::nullopt, std::nullopt});
  }
  return out;
}

TEST(Accuracy, GoldLabelsAndUndetermined) {
  Corpus c;
  for (int i = 0; i < 4; ++i) {
    auto m = make_message(std::to_string(i), "a b");
    m.group = Group::AA;
    c.messages.push_back(m);
  }
  c.messages[3].gold_language = "es";
  const std::vector<adapters::PredictionRecord> preds = {
      {"0", "s", "en", {}, {}, {}}, {"1", "s", "und", {}, {}, {}}, {"2", "s", "fr", {}, {}, {}}, {"3", "s", "es", {}, {}, {}}};
  const auto r = accuracy(preds, "s", Group::AA, BinScheme().bin(1), c);
  EXPECT_EQ(r.n, 4);
  EXPECT_EQ(r.n_english, 1);
  EXPECT_EQ(r.n_correct, 2);
  EXPECT_EQ(r.n_und, 1);
}

TEST(Accuracy, MissingPredictionsAreListed) {
  const auto c = labelled_corpus();
  auto preds = predict(c, "s", 3);
  preds.erase(preds.begin() + 5);
  try {
    accuracy(preds, "s", Group::AA, BinScheme().bin(1), c);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(" 5"), std::string::npos);
  }
}

TEST(RunAudit, WholeCellsAndExclusions) {
  const auto c = labelled_corpus();
  auto preds = predict(c, "s1", 3);
  const auto more = predict(c, "s0", 2);
  preds.insert(preds.end(), more.begin(), more.end());
  AuditConfig cfg;
  cfg.sample_size = 0;
  const auto r = run_audit(c, preds, cfg);
  EXPECT_EQ(r.cells.size(), 16u);
  EXPECT_EQ(r.disparities.size(), 8u);
  EXPECT_EQ(r.disparities[0].system, "s0");
  EXPECT_EQ(r.excluded_counts.at("empty_after_preprocessing"), 1);
  EXPECT_EQ(r.excluded_counts.at("unaligned"), 1);
  for (const auto& cell : r.cells) EXPECT_EQ(cell.n, 30);
  EXPECT_EQ(r.metadata["systems"], nlohmann::json({"s0", "s1"}));
}

TEST(RunAudit, SampledCellsAreDeterministic) {
  const auto c = labelled_corpus();
  const auto preds = predict(c, "s", 4);
  AuditConfig cfg;
  cfg.sample_size = 20;
  const auto a = to_json(run_audit(c, preds, cfg)).dump();
  EXPECT_EQ(a, to_json(run_audit(c, preds, cfg)).dump());
  for (const auto& cell : run_audit(c, preds, cfg).cells) EXPECT_EQ(cell.n, 20);
  cfg.sample_size = 31;
  EXPECT_THROW(run_audit(c, preds, cfg), DataError);
}

}  // namespace
}  // namespace dialect_audit::audit
