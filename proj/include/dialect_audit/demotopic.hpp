#pragma once

/**
 * Demographically anchored mixed-membership topic model.
 *
 * Each demographic covariate owns one topic (a unigram distribution phi_k).
 * A message m written by author u draws its topic mixture
 *
 *   theta_m ~ Dirichlet(alpha * pi_u)
 *
 * centred on the author's census prior pi_u, every token draws
 * z_t ~ Mult(theta_m), and the word is drawn from phi_{z_t} ~ Dirichlet(beta).
 *
 * Inference is collapsed Gibbs sampling over z with the full conditional
 *
 *   p(z_t = k | rest) ∝ (n_mk + alpha * pi_k) (n_kw + beta) / (n_k + V beta)
 *
 * where all counts exclude token t. Point estimates of phi and theta are
 * averaged over thinned post-burn-in sweeps.
 *
 * Held-out scoring keeps phi fixed. Messages with at most `exact_max_tokens`
 * in-vocabulary tokens are scored exactly: the sum over assignments factors
 * into a polynomial in the per-topic counts, accumulated token by token over
 * count vectors, then weighted by the Dirichlet-multinomial term. Longer
 * messages fall back to a seeded Gibbs chain.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dialect_audit/corpus.hpp"
#include "dialect_audit/error.hpp"
#include "dialect_audit/random.hpp"

namespace dialect_audit::demotopic {

struct Hyperparameters {
  double alpha = 10.0;
  double beta = 0.01;
  std::size_t num_topics = kNumDemographics;
  int iterations = 1000;
  int burn_in = 500;
  int sample_lag = 10;
  std::uint64_t seed = 1;
  // Each prior component is floored then renormalized; 0 disables.
  double prior_floor = 1e-4;
  // Words seen fewer times than this are out of vocabulary.
  std::size_t min_count = 5;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("alpha must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("beta must be positive");
    if (num_topics < 1) throw ArgumentError("need at least one topic");
    if (iterations < 1 || burn_in < 0 || sample_lag < 1) {
      throw ArgumentError("iterations and sample_lag must be positive, burn_in non-negative");
    }
    if (burn_in >= iterations) throw ArgumentError("burn_in must be smaller than iterations");
    if (prior_floor < 0.0 || prior_floor * static_cast<double>(num_topics) >= 1.0) {
      throw ArgumentError("prior_floor must lie in [0, 1/K)");
    }
  }
};

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
        throw DataError("duplicate vocabulary entry '" + words_[i] + "'");
      }
    }
  }

  std::optional<int> find(const std::string& w) const {
    const auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return words_.size(); }
  const std::string& word(int i) const { return words_[static_cast<std::size_t>(i)]; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// Training input in index space: one word-id list and one prior per message.
struct TopicData {
  std::vector<std::string> ids;
  std::vector<std::vector<int>> docs;
  std::vector<std::vector<double>> priors;
  Vocabulary vocab;

  std::size_t num_tokens() const {
    std::size_t n = 0;
    for (const auto& d : docs) n += d.size();
    return n;
  }
};

// Sorted vocabulary of words with at least `min_count` occurrences.
inline Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& m : corpus.messages) {
    for (const auto& t : m.tokens) ++counts[t];
  }
  std::vector<std::string> words;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) words.push_back(w);
  }
  return Vocabulary(std::move(words));
}

inline TopicData build_topic_data(const Corpus& corpus, std::size_t min_count) {
  TopicData data;
  data.vocab = build_vocabulary(corpus, min_count);
  for (const auto& m : corpus.messages) {
    if (!m.prior) throw DataError("message '" + m.id + "' has no demographic prior");
    std::vector<int> doc;
    for (const auto& t : m.tokens) {
      if (auto w = data.vocab.find(t)) doc.push_back(*w);
    }
    data.ids.push_back(m.id);
    data.docs.push_back(std::move(doc));
    data.priors.emplace_back(m.prior->weights.begin(), m.prior->weights.end());
  }
  return data;
}

inline std::vector<double> floor_prior(std::span<const double> prior, double floor) {
  std::vector<double> out(prior.begin(), prior.end());
  if (floor <= 0.0) return out;
  double sum = 0.0;
  for (double& x : out) {
    x = std::max(x, floor);
    sum += x;
  }
  for (double& x : out) x /= sum;
  return out;
}

// Fitted model reduced to what held-out scoring needs.
struct TopicModel {
  static constexpr int kFormatVersion = 1;

  Vocabulary vocab;
  Hyperparameters hyper;
  std::vector<double> phi;  // num_topics x V, row-major

  std::size_t num_topics() const { return hyper.num_topics; }
  double phi_at(std::size_t k, int w) const { return phi[k * vocab.size() + static_cast<std::size_t>(w)]; }
};

class TopicModelState {
 public:
  // Builds a state from explicit assignments; counts are derived from z.
  static TopicModelState from_assignments(TopicData data, Hyperparameters hyper,
                                          std::vector<std::vector<int>> z) {
    TopicModelState s(std::move(data), std::move(hyper));
    if (z.size() != s.data_.docs.size()) throw ArgumentError("assignment count mismatch");
    for (std::size_t m = 0; m < z.size(); ++m) {
      if (z[m].size() != s.data_.docs[m].size()) throw ArgumentError("assignment length mismatch");
      for (int k : z[m]) {
        if (k < 0 || static_cast<std::size_t>(k) >= s.K_) throw ArgumentError("topic out of range");
      }
    }
    s.z_ = std::move(z);
    s.rebuild_counts();
    s.set_point_estimates_from_counts();
    return s;
  }

  std::size_t num_topics() const { return K_; }
  std::size_t num_messages() const { return data_.docs.size(); }
  std::size_t vocab_size() const { return V_; }
  const TopicData& data() const { return data_; }
  const Hyperparameters& hyper() const { return hyper_; }
  const std::vector<std::vector<int>>& z() const { return z_; }
  const std::vector<double>& prior(std::size_t m) const { return priors_[m]; }

  int n_mk(std::size_t m, std::size_t k) const { return n_mk_[m * K_ + k]; }
  int n_kw(std::size_t k, std::size_t w) const { return n_kw_[k * V_ + w]; }
  int n_k(std::size_t k) const { return n_k_[k]; }

  double phi(std::size_t k, std::size_t w) const { return phi_[k * V_ + w]; }
  double theta(std::size_t m, std::size_t k) const { return theta_[m * K_ + k]; }
  std::span<const double> theta_row(std::size_t m) const {
    return std::span<const double>(theta_).subspan(m * K_, K_);
  }

  // Corpus log-likelihood after each sweep.
  const std::vector<double>& log_likelihood_trace() const { return trace_; }
  int samples_collected() const { return samples_; }

  // p(z_{m,t} = k | all other assignments), with token (m,t) removed from
  // the counts. Does not modify the state.
  std::vector<double> full_conditional(std::size_t m, std::size_t t) const {
    const int w = data_.docs.at(m).at(t);
    const int own = z_[m][t];
    std::vector<double> p(K_);
    conditional_into(m, w, own, p);
    return p;
  }

  // log p(words | z, beta) with phi integrated out.
  double log_likelihood() const {
    if (V_ == 0) return 0.0;
    const double vb = static_cast<double>(V_) * hyper_.beta;
    const double lg_b = std::lgamma(hyper_.beta);
    double ll = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
      ll += std::lgamma(vb) - std::lgamma(vb + n_k_[k]);
      for (std::size_t w = 0; w < V_; ++w) {
        const int c = n_kw_[k * V_ + w];
        if (c > 0) ll += std::lgamma(hyper_.beta + c) - lg_b;
      }
    }
    return ll;
  }

  // True when recounting z reproduces every count table cell.
  bool counts_consistent() const {
    TopicModelState copy(*this);
    copy.rebuild_counts();
    return copy.n_mk_ == n_mk_ && copy.n_kw_ == n_kw_ && copy.n_k_ == n_k_;
  }

  TopicModel model() const {
    TopicModel out;
    out.vocab = data_.vocab;
    out.hyper = hyper_;
    out.phi = phi_;
    return out;
  }

  // Runs the sampler from a seeded random initialization.
  friend TopicModelState fit(TopicData data, const Hyperparameters& hyper);

 private:
  TopicModelState(TopicData data, Hyperparameters hyper)
      : data_(std::move(data)),
        hyper_(std::move(hyper)),
        K_(hyper_.num_topics),
        V_(data_.vocab.size()) {
    if (data_.priors.size() != data_.docs.size()) throw ArgumentError("one prior per message required");
    for (const auto& p : data_.priors) {
      if (p.size() != K_) throw ArgumentError("prior length must equal the number of topics");
      priors_.push_back(floor_prior(p, hyper_.prior_floor));
    }
    for (const auto& d : data_.docs) {
      for (int w : d) {
        if (w < 0 || static_cast<std::size_t>(w) >= V_) throw ArgumentError("word id out of range");
      }
    }
  }

  void rebuild_counts() {
    n_mk_.assign(num_messages() * K_, 0);
    n_kw_.assign(K_ * V_, 0);
    n_k_.assign(K_, 0);
    for (std::size_t m = 0; m < z_.size(); ++m) {
      for (std::size_t t = 0; t < z_[m].size(); ++t) add(m, data_.docs[m][t], z_[m][t], +1);
    }
  }

  void add(std::size_t m, int w, int k, int delta) {
    const auto ku = static_cast<std::size_t>(k);
    n_mk_[m * K_ + ku] += delta;
    n_kw_[ku * V_ + static_cast<std::size_t>(w)] += delta;
    n_k_[ku] += delta;
  }

  // Unnormalized conditional written into p, then normalized. `own` is the
  // token's current topic (its count is excluded) or -1 when already removed.
  void conditional_into(std::size_t m, int w, int own, std::span<double> p) const {
    const double vb = static_cast<double>(V_) * hyper_.beta;
    double total = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
      const int self = static_cast<int>(k) == own ? 1 : 0;
      const double doc = (n_mk_[m * K_ + k] - self) + hyper_.alpha * priors_[m][k];
      const double word = (n_kw_[k * V_ + static_cast<std::size_t>(w)] - self) + hyper_.beta;
      const double norm = (n_k_[k] - self) + vb;
      p[k] = doc * word / norm;
      total += p[k];
    }
    for (double& x : p) x /= total;
  }

  void sweep(Rng& rng, std::vector<double>& scratch) {
    for (std::size_t m = 0; m < z_.size(); ++m) {
      for (std::size_t t = 0; t < z_[m].size(); ++t) {
        const int w = data_.docs[m][t];
        add(m, w, z_[m][t], -1);
        conditional_into(m, w, -1, scratch);
        const int k = static_cast<int>(rng.discrete(scratch, 1.0));
        z_[m][t] = k;
        add(m, w, k, +1);
      }
    }
  }

  void accumulate_estimates() {
    const double vb = static_cast<double>(V_) * hyper_.beta;
    for (std::size_t k = 0; k < K_; ++k) {
      for (std::size_t w = 0; w < V_; ++w) {
        phi_sum_[k * V_ + w] += (n_kw_[k * V_ + w] + hyper_.beta) / (n_k_[k] + vb);
      }
    }
    for (std::size_t m = 0; m < num_messages(); ++m) {
      const double denom = static_cast<double>(data_.docs[m].size()) + hyper_.alpha;
      for (std::size_t k = 0; k < K_; ++k) {
        theta_sum_[m * K_ + k] += (n_mk_[m * K_ + k] + hyper_.alpha * priors_[m][k]) / denom;
      }
    }
    ++samples_;
  }

  void finalize_estimates() {
    phi_.resize(phi_sum_.size());
    theta_.resize(theta_sum_.size());
    for (std::size_t i = 0; i < phi_sum_.size(); ++i) phi_[i] = phi_sum_[i] / samples_;
    for (std::size_t i = 0; i < theta_sum_.size(); ++i) theta_[i] = theta_sum_[i] / samples_;
  }

  void set_point_estimates_from_counts() {
    phi_sum_.assign(K_ * V_, 0.0);
    theta_sum_.assign(num_messages() * K_, 0.0);
    samples_ = 0;
    accumulate_estimates();
    finalize_estimates();
  }

  TopicData data_;
  Hyperparameters hyper_;
  std::size_t K_;
  std::size_t V_;
  std::vector<std::vector<double>> priors_;  // floored
  std::vector<std::vector<int>> z_;
  std::vector<int> n_mk_;
  std::vector<int> n_kw_;
  std::vector<int> n_k_;
  std::vector<double> phi_sum_;
  std::vector<double> theta_sum_;
  std::vector<double> phi_;
  std::vector<double> theta_;
  std::vector<double> trace_;
  int samples_ = 0;
};

inline TopicModelState fit(TopicData data, const Hyperparameters& hyper) {
  hyper.validate();
  if (data.num_tokens() == 0) throw DataError("corpus has zero in-vocabulary tokens");
  TopicModelState s(std::move(data), hyper);
  for (std::size_t m = 0; m < s.priors_.size(); ++m) {
    for (double p : s.priors_[m]) {
      if (!(hyper.alpha * p >= std::numeric_limits<double>::min())) {
        throw DataError("message '" + s.data_.ids[m] +
                        "': alpha * prior underflows to zero; set a positive prior floor");
      }
    }
  }

  Rng rng(hyper.seed);
  s.z_.resize(s.data_.docs.size());
  for (std::size_t m = 0; m < s.data_.docs.size(); ++m) {
    s.z_[m].resize(s.data_.docs[m].size());
    for (int& k : s.z_[m]) k = static_cast<int>(rng.below(s.K_));
  }
  s.rebuild_counts();
  s.phi_sum_.assign(s.K_ * s.V_, 0.0);
  s.theta_sum_.assign(s.num_messages() * s.K_, 0.0);
  s.samples_ = 0;

  std::vector<double> scratch(s.K_);
  for (int sweep = 1; sweep <= hyper.iterations; ++sweep) {
    s.sweep(rng, scratch);
    s.trace_.push_back(s.log_likelihood());
    if (sweep > hyper.burn_in && (sweep - hyper.burn_in - 1) % hyper.sample_lag == 0) {
      s.accumulate_estimates();
    }
  }
  s.finalize_estimates();
  return s;
}

inline TopicModelState fit(const Corpus& corpus, const Hyperparameters& hyper) {
  if (hyper.num_topics != kNumDemographics) {
    throw ArgumentError("corpus priors have 4 components; num_topics must be 4");
  }
  return fit(build_topic_data(corpus, hyper.min_count), hyper);
}

// Mean over messages of max_k |theta_mk - pi_mk| against the floored prior.
inline double mean_prior_deviation(const TopicModelState& s) {
  if (s.num_messages() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t m = 0; m < s.num_messages(); ++m) {
    double worst = 0.0;
    for (std::size_t k = 0; k < s.num_topics(); ++k) {
      worst = std::max(worst, std::abs(s.theta(m, k) - s.prior(m)[k]));
    }
    total += worst;
  }
  return total / static_cast<double>(s.num_messages());
}

// ---------------------------------------------------------------------------
// Held-out scoring

struct ScoreOptions {
  std::size_t exact_max_tokens = 12;
  int burn_in = 100;
  int samples = 500;
  std::uint64_t seed = 1;
};

struct PosteriorScore {
  std::string message_id;
  std::vector<double> proportions;
  bool exact = false;
};

namespace detail {

inline std::vector<double> exact_proportions(const TopicModel& model, std::span<const int> words,
                                             std::span<const double> prior) {
  const std::size_t K = model.num_topics();
  const std::size_t N = words.size();
  // count vectors keyed by base-(N+1) encoding
  std::map<std::uint64_t, double> states{{0, 1.0}};
  std::vector<std::uint64_t> place(K);
  for (std::size_t k = 0; k < K; ++k) place[k] = k == 0 ? 1 : place[k - 1] * (N + 1);

  for (int w : words) {
    std::map<std::uint64_t, double> next;
    double top = 0.0;
    for (const auto& [code, weight] : states) {
      for (std::size_t k = 0; k < K; ++k) {
        double& slot = next[code + place[k]];
        slot += weight * model.phi_at(k, w);
        top = std::max(top, slot);
      }
    }
    for (auto& [code, weight] : next) weight /= top;
    states = std::move(next);
  }

  const double alpha = model.hyper.alpha;
  std::vector<double> log_w;
  std::vector<std::vector<int>> counts;
  for (const auto& [code, weight] : states) {
    std::vector<int> n(K);
    std::uint64_t c = code;
    for (std::size_t k = 0; k < K; ++k) {
      n[k] = static_cast<int>(c % (N + 1));
      c /= (N + 1);
    }
    double lw = weight > 0.0 ? std::log(weight) : -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double a = alpha * prior[k];
      if (n[k] > 0) lw += a > 0.0 ? std::lgamma(a + n[k]) - std::lgamma(a) : -std::numeric_limits<double>::infinity();
    }
    log_w.push_back(lw);
    counts.push_back(std::move(n));
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> out(K, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    const double p = std::exp(log_w[i] - top);
    z += p;
    for (std::size_t k = 0; k < K; ++k) out[k] += p * counts[i][k];
  }
  for (double& x : out) x /= z * static_cast<double>(N);
  return out;
}

inline std::vector<double> gibbs_proportions(const TopicModel& model, std::span<const int> words,
                                             std::span<const double> prior, const ScoreOptions& opts) {
  const std::size_t K = model.num_topics();
  const double alpha = model.hyper.alpha;
  Rng rng(opts.seed);
  std::vector<int> z(words.size());
  std::vector<int> n(K, 0);
  std::vector<double> p(K);
  for (std::size_t t = 0; t < words.size(); ++t) {
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += p[k] = prior[k] * model.phi_at(k, words[t]);
    z[t] = static_cast<int>(rng.discrete(p, total));
    ++n[static_cast<std::size_t>(z[t])];
  }
  std::vector<double> acc(K, 0.0);
  for (int sweep = 0; sweep < opts.burn_in + opts.samples; ++sweep) {
    const bool collect = sweep >= opts.burn_in;
    for (std::size_t t = 0; t < words.size(); ++t) {
      --n[static_cast<std::size_t>(z[t])];
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        total += p[k] = (n[k] + alpha * prior[k]) * model.phi_at(k, words[t]);
      }
      if (collect) {
        for (std::size_t k = 0; k < K; ++k) acc[k] += p[k] / total;
      }
      z[t] = static_cast<int>(rng.discrete(p, total));
      ++n[static_cast<std::size_t>(z[t])];
    }
  }
  const double denom = static_cast<double>(opts.samples) * static_cast<double>(words.size());
  for (double& x : acc) x /= denom;
  return acc;
}

}  // namespace detail

// Posterior expected fraction of the message's in-vocabulary tokens drawn
// from each topic, with phi held fixed. Prior is floored as in training.
inline std::vector<double> posterior_proportions(const TopicModel& model, std::span<const int> words,
                                                 std::span<const double> prior,
                                                 const ScoreOptions& opts = {}, bool* exact = nullptr) {
  if (prior.size() != model.num_topics()) throw ArgumentError("prior length must equal the number of topics");
  if (words.empty()) throw DataError("unscorable message");
  const auto floored = floor_prior(prior, model.hyper.prior_floor);
  const bool use_exact = words.size() <= opts.exact_max_tokens;
  if (exact) *exact = use_exact;
  return use_exact ? detail::exact_proportions(model, words, floored)
                   : detail::gibbs_proportions(model, words, floored, opts);
}

inline PosteriorScore message_posterior(const TopicModel& model, const Message& message,
                                        const ScoreOptions& opts = {}) {
  if (!message.prior) throw DataError("message '" + message.id + "' has no demographic prior");
  std::vector<int> words;
  for (const auto& t : message.tokens) {
    if (auto w = model.vocab.find(t)) words.push_back(*w);
  }
  if (words.empty()) throw DataError("unscorable message '" + message.id + "': no in-vocabulary tokens");
  PosteriorScore score;
  score.message_id = message.id;
  score.proportions = posterior_proportions(model, words, message.prior->weights, opts, &score.exact);
  return score;
}

// Messages whose proportion for the group's topic strictly exceeds the
// threshold, labelled with that group.
inline Corpus align_filter(const Corpus& corpus, const std::vector<PosteriorScore>& scores, Group group,
                           double threshold = 0.8) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must lie in (0, 1]");
  const std::size_t topic = topic_of(group);
  std::unordered_map<std::string, const PosteriorScore*> by_id;
  for (const auto& s : scores) by_id[s.message_id] = &s;

  Corpus out;
  out.source_path = corpus.source_path;
  out.format_version = corpus.format_version;
  std::vector<std::string> missing;
  for (const auto& m : corpus.messages) {
    const auto it = by_id.find(m.id);
    if (it == by_id.end()) {
      missing.push_back(m.id);
      continue;
    }
    if (it->second->proportions.size() <= topic) throw DataError("score for '" + m.id + "' lacks the group topic");
    if (it->second->proportions[topic] > threshold) {
      Message copy = m;
      copy.group = group;
      out.messages.push_back(std::move(copy));
    }
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " message(s) have no posterior score:";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    throw DataError(msg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const TopicModel& model) {
  nlohmann::json j;
  j["format"] = "dialect-audit/topic-model";
  j["version"] = TopicModel::kFormatVersion;
  j["num_topics"] = model.hyper.num_topics;
  j["alpha"] = model.hyper.alpha;
  j["beta"] = model.hyper.beta;
  j["prior_floor"] = model.hyper.prior_floor;
  j["min_count"] = model.hyper.min_count;
  j["iterations"] = model.hyper.iterations;
  j["burn_in"] = model.hyper.burn_in;
  j["sample_lag"] = model.hyper.sample_lag;
  j["seed"] = model.hyper.seed;
  j["vocab"] = model.vocab.words();
  j["phi"] = model.phi;
  return j;
}

inline TopicModel topic_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "dialect-audit/topic-model") throw DataError("not a topic model file");
    if (j.at("version").get<int>() != TopicModel::kFormatVersion) throw DataError("unsupported topic model version");
    TopicModel m;
    m.hyper.num_topics = j.at("num_topics").get<std::size_t>();
    m.hyper.alpha = j.at("alpha").get<double>();
    m.hyper.beta = j.at("beta").get<double>();
    m.hyper.prior_floor = j.at("prior_floor").get<double>();
    m.hyper.min_count = j.at("min_count").get<std::size_t>();
    m.hyper.iterations = j.at("iterations").get<int>();
    m.hyper.burn_in = j.at("burn_in").get<int>();
    m.hyper.sample_lag = j.at("sample_lag").get<int>();
    m.hyper.seed = j.at("seed").get<std::uint64_t>();
    m.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
    m.phi = j.at("phi").get<std::vector<double>>();
    if (m.phi.size() != m.hyper.num_topics * m.vocab.size()) throw DataError("phi has the wrong shape");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed topic model: ") + e.what());
  }
}

inline void save_model(const TopicModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << to_json(model).dump() << '\n';
}

inline TopicModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read topic model " + path);
  try {
    return topic_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed topic model " + path + ": " + e.what());
  }
}

}  // namespace dialect_audit::demotopic
