#pragma once

// Command-line pipeline. Each stage reads and writes files so it can be
// re-run on its own; every output gets a manifest with input digests.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 remote-endpoint failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dialect_audit/adapters.hpp"
#include "dialect_audit/audit.hpp"
#include "dialect_audit/corpus.hpp"
#include "dialect_audit/demotopic.hpp"
#include "dialect_audit/error.hpp"
#include "dialect_audit/langid.hpp"
#include "dialect_audit/manifest.hpp"

namespace dialect_audit::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRemote = 3 };

namespace detail {

inline CorpusFormat format_for(const std::string& path, const std::string& declared) {
  if (!declared.empty()) {
    const auto f = parse_corpus_format(declared);
    if (!f) throw ArgumentError("unknown corpus format '" + declared + "' (expected jsonl or tsv)");
    return *f;
  }
  return std::filesystem::path(path).extension() == ".tsv" ? CorpusFormat::tsv : CorpusFormat::jsonl;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed for " + path);
}

inline std::string alpha_suffix(double a) {
  std::ostringstream os;
  os << a;
  return os.str();
}

struct ScoreRow {
  std::string id;
  std::optional<std::vector<double>> proportions;
};

inline std::vector<ScoreRow> load_scores(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read scores file " + path);
  std::vector<ScoreRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ScoreRow r{j.at("id").get<std::string>(), std::nullopt};
      if (j.contains("proportions")) r.proportions = j["proportions"].get<std::vector<double>>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Dialect disparity audits for language identification"};
  app.name("dialect-audit");
  app.set_config("--config", "", "TOML/INI file supplying option values");
  app.require_subcommand(1);

  // prep
  std::string prep_in, prep_out, prep_format;
  bool prep_dedupe = false, prep_lenient = false;
  auto* prep = app.add_subcommand("prep", "Preprocess and tokenize a raw corpus into JSONL");
  prep->add_option("--in", prep_in, "Raw corpus (JSONL or TSV)")->required();
  prep->add_option("--out", prep_out, "Prepared JSONL corpus")->required();
  prep->add_option("--format", prep_format, "jsonl or tsv (default: by extension)");
  prep->add_flag("--dedupe", prep_dedupe, "Drop repeated message ids");
  prep->add_flag("--lenient", prep_lenient, "Skip invalid records instead of failing");

  // fit-demo
  std::string fit_in, fit_out, fit_trace;
  demotopic::Hyperparameters hyper;
  std::vector<double> alpha_sweep;
  auto* fit = app.add_subcommand("fit-demo", "Fit the demographic mixed-membership topic model");
  fit->add_option("--in", fit_in, "Corpus with per-message demographic priors")->required();
  fit->add_option("--out", fit_out, "Model file (JSON)")->required();
  fit->add_option("--alpha", hyper.alpha, "Dirichlet concentration around the prior")->capture_default_str();
  fit->add_option("--beta", hyper.beta, "Topic-word smoothing")->capture_default_str();
  fit->add_option("--iters", hyper.iterations, "Gibbs sweeps")->capture_default_str();
  fit->add_option("--burn-in", hyper.burn_in, "Sweeps discarded before averaging")->capture_default_str();
  fit->add_option("--lag", hyper.sample_lag, "Thinning interval after burn-in")->capture_default_str();
  fit->add_option("--seed", hyper.seed, "Random seed")->capture_default_str();
  fit->add_option("--min-count", hyper.min_count, "Minimum word frequency for the vocabulary")->capture_default_str();
  fit->add_option("--prior-floor", hyper.prior_floor, "Floor applied to prior components")->capture_default_str();
  fit->add_option("--alpha-sweep", alpha_sweep, "Fit once per alpha value; writes <out>.alpha-<a>")->delimiter(',');
  fit->add_option("--trace", fit_trace, "CSV of per-sweep log-likelihood");

  // score
  std::string score_model, score_in, score_out;
  demotopic::ScoreOptions score_opts;
  auto* score = app.add_subcommand("score", "Posterior topic proportions for each message");
  score->add_option("--model", score_model, "Topic model file")->required();
  score->add_option("--in", score_in, "Corpus with priors")->required();
  score->add_option("--out", score_out, "Scores JSONL")->required();
  score->add_option("--seed", score_opts.seed, "Seed for long-message Gibbs scoring")->capture_default_str();
  score->add_option("--exact-max", score_opts.exact_max_tokens, "Exact scoring up to this many tokens")
      ->capture_default_str();
  score->add_option("--burn-in", score_opts.burn_in, "Held-out Gibbs burn-in")->capture_default_str();
  score->add_option("--samples", score_opts.samples, "Held-out Gibbs samples")->capture_default_str();

  // filter
  std::string filter_in, filter_scores, filter_out;
  std::vector<std::string> filter_groups;
  double filter_threshold = 0.8;
  auto* filter = app.add_subcommand("filter", "Keep messages aligned with a demographic group");
  filter->add_option("--in", filter_in, "Corpus")->required();
  filter->add_option("--scores", filter_scores, "Scores JSONL (default: proportions stored in the corpus)");
  filter->add_option("--group", filter_groups, "AA or WH (repeatable)")->required();
  filter->add_option("--threshold", filter_threshold, "Strict lower bound on the group proportion")
      ->capture_default_str();
  filter->add_option("--out", filter_out, "Filtered JSONL corpus")->required();

  // train-langid
  std::string train_in, train_out;
  langid::LangIdConfig lcfg;
  std::size_t max_features = 0;
  auto* train = app.add_subcommand("train-langid", "Train the n-gram language identifier");
  train->add_option("--in", train_in, "Training JSONL {text, lang}")->required();
  train->add_option("--out", train_out, "Model file (JSON)")->required();
  train->add_option("--ngram-min", lcfg.ngram_min)->capture_default_str();
  train->add_option("--ngram-max", lcfg.ngram_max)->capture_default_str();
  train->add_option("--smoothing", lcfg.smoothing, "Add-k smoothing")->capture_default_str();
  train->add_option("--max-features", max_features, "Keep only the most frequent n-grams (0 = all)");
  train->add_flag("--use-priors", lcfg.use_priors, "Use empirical class priors");

  // classify
  std::string cls_model, cls_text, cls_in, cls_out, cls_system = "langid";
  double cls_threshold = 0.0;
  auto* cls = app.add_subcommand("classify", "Identify the language of a text or a corpus");
  cls->add_option("--model", cls_model, "Language model file")->required();
  auto* cls_text_opt = cls->add_option("--text", cls_text, "Classify one text and print the prediction");
  auto* cls_in_opt = cls->add_option("--in", cls_in, "Corpus to classify");
  cls->add_option("--out", cls_out, "Predictions JSONL");
  cls->add_option("--system", cls_system, "System name written into predictions")->capture_default_str();
  cls->add_option("--threshold", cls_threshold, "Confidence required for an English call")->capture_default_str();
  cls_text_opt->excludes(cls_in_opt);

  // fetch-predictions
  std::string fetch_config, fetch_in, fetch_out, fetch_system;
  auto* fetch = app.add_subcommand("fetch-predictions", "Query a remote identifier and persist its predictions");
  fetch->add_option("--endpoint", fetch_config, "Endpoint config (JSON)")->required();
  fetch->add_option("--in", fetch_in, "Corpus")->required();
  fetch->add_option("--out", fetch_out, "Predictions JSONL")->required();
  fetch->add_option("--system", fetch_system, "System name")->required();

  // audit
  std::string audit_corpus, audit_out, audit_md, audit_chart;
  std::vector<std::string> audit_preds, audit_systems;
  audit::AuditConfig acfg;
  std::vector<int> bin_edges{5, 10, 15};
  auto* aud = app.add_subcommand("audit", "Length-binned disparity audit");
  aud->add_option("--corpus", audit_corpus, "Group-labelled corpus")->required();
  aud->add_option("--predictions", audit_preds, "Predictions JSONL (repeatable)")->required();
  aud->add_option("--system", audit_systems, "Restrict to these systems (repeatable)");
  aud->add_option("--sample-size", acfg.sample_size, "Messages per (group, bin) cell; 0 = whole cell")
      ->capture_default_str();
  aud->add_option("--seed", acfg.seed, "Sampling seed")->capture_default_str();
  aud->add_option("--bins", bin_edges, "Upper bin edges")->delimiter(',')->capture_default_str();
  aud->add_option("--out", audit_out, "Report JSON")->required();
  aud->add_option("--markdown", audit_md, "Also write the Markdown table here");
  aud->add_option("--chart", audit_chart, "Also write bar-chart CSV here");

  // report
  std::string rep_in, rep_out, rep_format = "markdown";
  auto* rep = app.add_subcommand("report", "Re-render a saved audit report");
  rep->add_option("--in", rep_in, "Report JSON")->required();
  rep->add_option("--format", rep_format, "markdown, json or chart")
      ->check(CLI::IsMember({"markdown", "json", "chart"}))
      ->capture_default_str();
  rep->add_option("--out", rep_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (prep->parsed()) {
      LoadOptions opts{prep_dedupe, !prep_lenient};
      const auto corpus = load_corpus(prep_in, detail::format_for(prep_in, prep_format), opts);
      for (const auto& d : corpus.diagnostics) err << "warning: " << d << "\n";
      write_corpus_jsonl(corpus, prep_out);
      Manifest m{"prep"};
      m.config = {{"format", prep_format}, {"dedupe", prep_dedupe}, {"lenient", prep_lenient}};
      m.add_input("corpus", prep_in);
      m.add_output("corpus", prep_out);
      m.write(prep_out);
      out << "prepared " << corpus.size() << " messages (" << corpus.empty_count()
          << " empty after preprocessing) -> " << prep_out << "\n";
      return kOk;
    }

    if (fit->parsed()) {
      const auto corpus = load_corpus(fit_in, CorpusFormat::jsonl);
      std::vector<double> alphas = alpha_sweep.empty() ? std::vector<double>{hyper.alpha} : alpha_sweep;
      for (double a : alphas) {
        auto h = hyper;
        h.alpha = a;
        const auto state = demotopic::fit(corpus, h);
        const auto path = alpha_sweep.empty() ? fit_out : fit_out + ".alpha-" + detail::alpha_suffix(a);
        demotopic::save_model(state.model(), path);
        if (!fit_trace.empty()) {
          std::ostringstream csv;
          csv.precision(17);
          csv << "sweep,log_likelihood\n";
          const auto& tr = state.log_likelihood_trace();
          for (std::size_t i = 0; i < tr.size(); ++i) csv << i + 1 << "," << tr[i] << "\n";
          const auto trace_path = alpha_sweep.empty() ? fit_trace : fit_trace + ".alpha-" + detail::alpha_suffix(a);
          detail::write_text(trace_path, csv.str());
        }
        Manifest m{"fit-demo"};
        m.config = {{"alpha", h.alpha},         {"beta", h.beta},        {"iterations", h.iterations},
                    {"burn_in", h.burn_in},     {"sample_lag", h.sample_lag}, {"seed", h.seed},
                    {"min_count", h.min_count}, {"prior_floor", h.prior_floor}};
        m.config["final_log_likelihood"] = state.log_likelihood_trace().back();
        m.config["mean_prior_deviation"] = demotopic::mean_prior_deviation(state);
        m.add_input("corpus", fit_in);
        m.add_output("model", path);
        m.write(path);
        out << "alpha=" << a << " vocab=" << state.vocab_size() << " final_loglik=" << state.log_likelihood_trace().back()
            << " mean|theta-pi|inf=" << demotopic::mean_prior_deviation(state) << " -> " << path << "\n";
      }
      return kOk;
    }

    if (score->parsed()) {
      const auto model = demotopic::load_model(score_model);
      const auto corpus = load_corpus(score_in, CorpusFormat::jsonl);
      std::ostringstream buf;
      std::size_t unscorable = 0;
      for (const auto& msg : corpus.messages) {
        nlohmann::json j{{"id", msg.id}};
        try {
          const auto s = demotopic::message_posterior(model, msg, score_opts);
          j["proportions"] = s.proportions;
          j["exact"] = s.exact;
        } catch (const DataError& e) {
          if (!msg.prior) throw;
          j["unscorable"] = true;
          ++unscorable;
        }
        buf << j.dump() << "\n";
      }
      detail::write_text(score_out, buf.str());
      Manifest m{"score"};
      m.config = {{"seed", score_opts.seed},
                  {"exact_max_tokens", score_opts.exact_max_tokens},
                  {"burn_in", score_opts.burn_in},
                  {"samples", score_opts.samples}};
      m.add_input("model", score_model);
      m.add_input("corpus", score_in);
      m.add_output("scores", score_out);
      m.write(score_out);
      out << "scored " << corpus.size() - unscorable << " messages, " << unscorable << " unscorable -> " << score_out
          << "\n";
      return kOk;
    }

    if (filter->parsed()) {
      const auto corpus = load_corpus(filter_in, CorpusFormat::jsonl);
      std::vector<demotopic::PosteriorScore> scores;
      Corpus scored;
      scored.source_path = corpus.source_path;
      std::size_t skipped = 0;
      if (!filter_scores.empty()) {
        std::unordered_map<std::string, std::optional<std::vector<double>>> by_id;
        for (auto& r : detail::load_scores(filter_scores)) by_id[r.id] = std::move(r.proportions);
        for (const auto& msg : corpus.messages) {
          const auto it = by_id.find(msg.id);
          if (it == by_id.end()) throw DataError("message '" + msg.id + "' missing from " + filter_scores);
          if (!it->second) {
            ++skipped;
            continue;
          }
          scores.push_back({msg.id, *it->second, false});
          scored.messages.push_back(msg);
        }
      } else {
        for (const auto& msg : corpus.messages) {
          if (!msg.proportions) throw DataError("message '" + msg.id + "' has no stored proportions; pass --scores");
          scores.push_back({msg.id, {msg.proportions->begin(), msg.proportions->end()}, false});
          scored.messages.push_back(msg);
        }
      }
      Corpus result;
      for (const auto& gs : filter_groups) {
        const auto g = parse_group(gs);
        if (!g || *g == Group::none) throw ArgumentError("--group must be AA or WH");
        auto part = demotopic::align_filter(scored, scores, *g, filter_threshold);
        for (auto& msg : part.messages) result.messages.push_back(std::move(msg));
        out << gs << ": " << part.size() << " aligned messages\n";
      }
      write_corpus_jsonl(result, filter_out);
      Manifest m{"filter"};
      m.config = {{"groups", filter_groups}, {"threshold", filter_threshold}, {"unscorable_skipped", skipped}};
      m.add_input("corpus", filter_in);
      if (!filter_scores.empty()) m.add_input("scores", filter_scores);
      m.add_output("corpus", filter_out);
      m.write(filter_out);
      return kOk;
    }

    if (train->parsed()) {
      if (max_features > 0) lcfg.max_features = max_features;
      const auto docs = langid::load_training_docs(train_in);
      const auto model = langid::train(docs, lcfg);
      langid::save_model(model, train_out);
      Manifest m{"train-langid"};
      m.config = {{"ngram_min", lcfg.ngram_min},
                  {"ngram_max", lcfg.ngram_max},
                  {"smoothing", lcfg.smoothing},
                  {"max_features", max_features},
                  {"use_priors", lcfg.use_priors}};
      m.add_input("training", train_in);
      m.add_output("model", train_out);
      m.write(train_out);
      out << "trained on " << docs.size() << " documents, " << model.languages().size() << " languages, "
          << model.num_features() << " n-grams -> " << train_out << "\n";
      return kOk;
    }

    if (cls->parsed()) {
      const auto model = langid::load_model(cls_model);
      if (!cls_text_opt->empty()) {
        const auto p = langid::classify(model, preprocess(cls_text));
        nlohmann::json j{{"lang", p.language},
                         {"confidence", p.confidence},
                         {"english", langid::is_english(p, cls_threshold)},
                         {"degenerate", p.degenerate}};
        for (std::size_t l = 0; l < p.scores.size(); ++l) j["scores"][model.languages()[l]] = p.scores[l];
        out << j.dump() << "\n";
        return kOk;
      }
      if (cls_in.empty() || cls_out.empty()) throw ArgumentError("classify needs --text, or --in with --out");
      const auto corpus = load_corpus(cls_in, CorpusFormat::jsonl);
      std::vector<adapters::PredictionRecord> records;
      records.reserve(corpus.size());
      for (const auto& msg : corpus.messages) {
        adapters::PredictionRecord r;
        r.message_id = msg.id;
        r.system = cls_system;
        if (msg.clean_text.empty()) {
          r.language = std::string(adapters::kUndetermined);
          r.error = "unclassifiable empty message";
        } else {
          const auto p = langid::classify(model, msg.clean_text);
          r.language = p.language;
          r.confidence = p.confidence;
        }
        records.push_back(std::move(r));
      }
      adapters::write_predictions(records, cls_out);
      Manifest m{"classify"};
      m.config = {{"system", cls_system}};
      m.add_input("model", cls_model);
      m.add_input("corpus", cls_in);
      m.add_output("predictions", cls_out);
      m.write(cls_out);
      out << "classified " << records.size() << " messages -> " << cls_out << "\n";
      return kOk;
    }

    if (fetch->parsed()) {
      const auto config = adapters::load_endpoint_config(fetch_config);
      const auto corpus = load_corpus(fetch_in, CorpusFormat::jsonl);
      std::vector<Message> to_query;
      for (const auto& msg : corpus.messages) {
        if (!msg.clean_text.empty()) to_query.push_back(msg);
      }
      auto records = adapters::query_remote(config, to_query, fetch_system, fetch_out);
      std::size_t failures = 0;
      for (const auto& r : records) failures += r.error.has_value();
      Manifest m{"fetch-predictions"};
      m.config = {{"system", fetch_system},
                  {"base_url", config.base_url},
                  {"rate_limit", config.rate_limit},
                  {"max_retries", config.max_retries}};
      m.add_input("corpus", fetch_in);
      m.add_input("endpoint_config", fetch_config);
      m.add_output("predictions", fetch_out);
      m.write(fetch_out);
      out << "fetched " << records.size() << " predictions (" << failures << " failed, recorded as und) -> "
          << fetch_out << "\n";
      return kOk;
    }

    if (aud->parsed()) {
      acfg.bins = BinScheme(bin_edges);
      acfg.systems = audit_systems;
      const auto corpus = load_corpus(audit_corpus, CorpusFormat::jsonl);
      const auto corpus_hash = sha256_file(audit_corpus);
      std::vector<adapters::PredictionRecord> records;
      for (const auto& p : audit_preds) {
        if (const auto man = read_manifest(p)) {
          const auto& inputs = (*man)["inputs"];
          if (inputs.contains("corpus") && inputs["corpus"]["sha256"] != corpus_hash) {
            throw DataError("predictions " + p + " were produced from a different corpus (hash mismatch with " +
                            audit_corpus + ")");
          }
        } else {
          err << "warning: " << p << " has no manifest; corpus provenance unchecked\n";
        }
        auto loaded = adapters::load_predictions(p);
        for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
        for (auto& r : loaded.records) records.push_back(std::move(r));
      }
      nlohmann::json meta{{"corpus_file", std::filesystem::path(audit_corpus).filename().string()},
                          {"corpus_sha256", corpus_hash}};
      const auto report = audit::run_audit(corpus, records, acfg, meta);
      detail::write_text(audit_out, audit::to_json(report).dump(2) + "\n");
      const auto md = audit::render_markdown(report);
      if (!audit_md.empty()) detail::write_text(audit_md, md);
      if (!audit_chart.empty()) detail::write_text(audit_chart, audit::chart_csv(report));
      Manifest m{"audit"};
      m.config = {{"sample_size", acfg.sample_size}, {"seed", acfg.seed}, {"bins", bin_edges}, {"systems", audit_systems}};
      m.add_input("corpus", audit_corpus);
      for (std::size_t i = 0; i < audit_preds.size(); ++i) m.add_input("predictions_" + std::to_string(i), audit_preds[i]);
      m.add_output("report", audit_out);
      if (!audit_md.empty()) m.add_output("markdown", audit_md);
      if (!audit_chart.empty()) m.add_output("chart", audit_chart);
      m.write(audit_out);
      out << md;
      return kOk;
    }

    if (rep->parsed()) {
      std::ifstream in(rep_in, std::ios::binary);
      if (!in) throw DataError("cannot read report " + rep_in);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw DataError("malformed report " + rep_in + ": " + e.what());
      }
      const auto report = audit::report_from_json(j);
      std::string text;
      if (rep_format == "markdown") {
        text = audit::render_markdown(report);
      } else if (rep_format == "chart") {
        text = audit::chart_csv(report);
      } else {
        text = audit::to_json(report).dump(2) + "\n";
      }
      if (rep_out.empty()) {
        out << text;
      } else {
        detail::write_text(rep_out, text);
      }
      return kOk;
    }
  } catch (const RemoteError& e) {
    err << "error: " << e.what() << "\n";
    return kRemote;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace dialect_audit::cli
