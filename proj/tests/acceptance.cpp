// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// non-zero when any selected criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dialect_audit/cli.hpp"
#include "dialect_audit/dialect_audit.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "support/published_table.hpp"
#include "support/temp_dir.hpp"

using namespace dialect_audit;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

Outcome published_table_reproduction() {
  const auto rows = audit::table_rows(audit::build_report(testing::published_cells()));
  const auto& want = testing::published_table();
  int matched = 0;
  std::string mismatches;
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (i < rows.size() && rows[i].joined() == want[i].expected) {
      ++matched;
    } else {
      mismatches += "; " + want[i].system + " " + want[i].bin_label() + ": got \"" +
                    (i < rows.size() ? rows[i].joined() : "<missing>") + "\", table prints \"" + want[i].expected + "\"";
    }
  }
  return {matched == 16 && rows.size() == 16, std::to_string(matched) + "/16 rows identical" + mismatches};
}

Outcome relative_arithmetic() {
  const double rel = *audit::relative_underrepresentation(0.540, 0.737);
  const auto shown = audit::render_whole_percent(rel);
  return {shown == "27%" && std::abs(rel - 0.2673) <= 0.0005, "value " + fmt("%.6f", rel) + " rendered " + shown};
}

Outcome significance_footnote() {
  const double p_mid = audit::significance_test(2393, 2500, 2400, 2500);
  const double p_short = audit::significance_test(1350, 2500, 1843, 2500);
  return {p_mid >= 0.35 && p_mid <= 0.65 && p_short < 0.01,
          "Twitter 10<t<=15 p=" + fmt("%.4f", p_mid) + ", Twitter t<=5 p=" + fmt("%.3g", p_short)};
}

Outcome stderr_bound() {
  double lo = 1.0, hi = 0.0;
  for (const auto& c : testing::published_cells()) {
    lo = std::min(lo, c.standard_error());
    hi = std::max(hi, c.standard_error());
  }
  return {lo >= 0.0004 && hi <= 0.0100, "stderr range [" + fmt("%.6f", lo) + ", " + fmt("%.6f", hi) + "]"};
}

Outcome gibbs_oracle() {
  demotopic::TopicData data;
  data.vocab = demotopic::Vocabulary({"w0", "w1"});
  data.ids = {"m0", "m1", "m2"};
  data.docs = {{0}, {1}, {0}};
  data.priors = {{0.7, 0.3}, {0.2, 0.8}, {0.5, 0.5}};
  demotopic::Hyperparameters h;
  h.alpha = 1.0;
  h.beta = 0.5;
  h.num_topics = 2;
  h.burn_in = 1000;
  h.iterations = 1000 + 10000;
  h.sample_lag = 1;
  h.prior_floor = 0.0;
  h.min_count = 1;
  h.seed = 11;
  const auto expected = testing::enumerate_theta(data, 1.0, 0.5, 2);
  const auto state = demotopic::fit(data, h);
  double worst = 0.0;
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t k = 0; k < 2; ++k) worst = std::max(worst, std::abs(state.theta(m, k) - expected[m][k]));
  }
  return {worst <= 0.02 && state.samples_collected() == 10000,
          "max |theta - exact| = " + fmt("%.5f", worst) + " over " + std::to_string(state.samples_collected()) +
              " samples"};
}

Outcome prior_dominance() {
  Rng rng(3);
  Corpus corpus;
  for (int m = 0; m < 150; ++m) {
    std::vector<double> prior(4);
    double sum = 0.0;
    for (double& x : prior) sum += x = 0.05 + rng.uniform();
    prior[rng.below(4)] += 2.0;
    sum += 2.0;
    for (double& x : prior) x /= sum;
    std::string text;
    const std::size_t len = 4 + rng.below(8);
    for (std::size_t t = 0; t < len; ++t) {
      text += (t ? " " : "") + std::to_string(rng.discrete(prior, 1.0)) + ":" + std::to_string(rng.below(6));
    }
    auto msg = make_message("m" + std::to_string(m), text);
    msg.prior = DemographicPrior::from_weights(prior);
    corpus.messages.push_back(std::move(msg));
  }
  demotopic::Hyperparameters h;
  h.iterations = 200;
  h.burn_in = 100;
  h.sample_lag = 5;
  h.min_count = 1;
  std::vector<double> dev;
  std::string detail;
  for (double alpha : {1.0, 10.0, 100.0, 1e4}) {
    h.alpha = alpha;
    dev.push_back(demotopic::mean_prior_deviation(demotopic::fit(corpus, h)));
    detail += (detail.empty() ? "" : ", ") + fmt("alpha=%g", alpha) + fmt(": %.5f", dev.back());
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < dev.size(); ++i) decreasing &= dev[i] < dev[i - 1];
  return {decreasing, detail};
}

Outcome naive_bayes_oracle() {
  Rng rng(77);
  const std::string alphabet = "abcde f";
  auto random_text = [&](std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
    return s;
  };
  int agree = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<langid::LabeledDoc> docs;
    const std::size_t L = 2 + rng.below(3);
    for (std::size_t l = 0; l < L; ++l) {
      for (int d = 0; d < 3; ++d) docs.push_back({random_text(3 + rng.below(15)), "l" + std::to_string(l)});
    }
    langid::LangIdConfig cfg;
    cfg.ngram_max = 1 + static_cast<int>(rng.below(4));
    cfg.smoothing = 0.1 + rng.uniform();
    const auto model = langid::train(docs, cfg);
    const auto text = random_text(1 + rng.below(20));
    const auto want = testing::brute_posterior(docs, text, cfg.ngram_max, cfg.smoothing);
    const auto got = langid::classify(model, text);
    const auto best = static_cast<std::size_t>(std::max_element(want.begin(), want.end()) - want.begin());
    agree += got.language == model.languages()[best];
    for (std::size_t l = 0; l < want.size(); ++l) worst = std::max(worst, std::abs(got.scores[l] - want[l]));
  }
  return {agree == 100 && worst <= 1e-9,
          std::to_string(agree) + "/100 argmax agree, max score error " + fmt("%.3g", worst)};
}

Outcome alignment_boundary() {
  Corpus c;
  std::vector<demotopic::PosteriorScore> scores;
  const double props[] = {0.79, 0.80, 0.81};
  for (int i = 0; i < 3; ++i) {
    c.messages.push_back(make_message(std::to_string(i), "x"));
    scores.push_back({std::to_string(i), {0.1, props[i], 0.05, 0.05}, true});
  }
  const auto kept = demotopic::align_filter(c, scores, Group::AA, 0.8);
  std::string ids;
  for (const auto& m : kept.messages) ids += (ids.empty() ? "" : ",") + m.id;
  return {kept.size() == 1 && kept.messages[0].id == "2", "kept {" + ids + "} (index 2 is 0.81)"};
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"dialect-audit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// train-langid -> classify -> audit on the synthetic dialect corpora; returns
// the report JSON text, empty on failure.
std::string synthetic_pipeline(const testing::TempDir& dir) {
  const auto langs = testing::make_languages(2017);
  const auto train = dir.file("train.jsonl");
  const auto raw = dir.file("raw.jsonl");
  testing::write_training(langs, train, 1500, 1);
  testing::write_dialect_corpus(langs, raw, 3000, 0.30, 2);
  const auto corpus = dir.file("corpus.jsonl");
  const auto model = dir.file("langid.json");
  const auto preds = dir.file("preds.jsonl");
  const auto report = dir.file("report.json");
  if (run_cli({"prep", "--in", raw, "--out", corpus}) != 0) return {};
  if (run_cli({"train-langid", "--in", train, "--out", model}) != 0) return {};
  if (run_cli({"classify", "--model", model, "--in", corpus, "--out", preds, "--system", "ngram-nb"}) != 0) return {};
  if (run_cli({"audit", "--corpus", corpus, "--predictions", preds, "--seed", "7", "--out", report}) != 0) return {};
  return testing::slurp(report);
}

Outcome synthetic_disparity() {
  testing::TempDir dir;
  const auto text = synthetic_pipeline(dir);
  if (text.empty()) return {false, "pipeline failed"};
  const auto j = nlohmann::json::parse(text);
  std::vector<double> diffs;
  std::string detail;
  bool sizes_ok = true;
  for (const auto& c : j["cells"]) sizes_ok &= c["n"] == 2500;
  for (const auto& d : j["disparities"]) {
    diffs.push_back(d["diff"].get<double>());
    detail += (detail.empty() ? "" : ", ") + d["bin"]["label"].get<std::string>() + ": " + d["rendered_diff"].get<std::string>();
  }
  bool positive = diffs.size() == 4;
  for (double d : diffs) positive &= d > 0.0;
  const bool shrinking = diffs.size() == 4 && diffs[0] > diffs[3];
  return {positive && shrinking && sizes_ok, "diff by bin " + detail + (sizes_ok ? "" : " (cell sizes not 2500)")};
}

Outcome determinism() {
  testing::TempDir a, b;
  const auto first = synthetic_pipeline(a);
  const auto second = synthetic_pipeline(b);
  const bool same = !first.empty() && first == second;
  return {same, same ? std::to_string(first.size()) + " report bytes identical" : "reports differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"published table arithmetic", published_table_reproduction},
      {"relative underrepresentation 27%", relative_arithmetic},
      {"significance footnote", significance_footnote},
      {"standard error bound", stderr_bound},
      {"Gibbs sampler vs exhaustive enumeration", gibbs_oracle},
      {"prior dominance as alpha grows", prior_dominance},
      {"naive Bayes vs brute-force scorer", naive_bayes_oracle},
      {"alignment filter boundary", alignment_boundary},
      {"synthetic end-to-end disparity", synthetic_disparity},
      {"determinism of the synthetic pipeline", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::chrono::duration<double> secs = std::chrono::steady_clock::now() - start;
    failures += !o.pass;
    std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << "  ("
              << o.detail << "; " << fmt("%.2fs", secs.count()) << ")\n";
  }
  return failures == 0 ? 0 : 1;
}
