#pragma once

// Makes external language identifiers auditable: offline prediction files
// and a rate-limited client for remote identification endpoints.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dialect_audit/corpus.hpp"
#include "dialect_audit/error.hpp"

namespace dialect_audit::adapters {

inline constexpr std::string_view kUndetermined = "und";

struct PredictionRecord {
  std::string message_id;
  std::string system;
  std::string language;
  std::optional<double> confidence;
  std::optional<std::string> queried_at;  // ISO-8601 UTC
  std::optional<std::string> error;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

// Maps a raw label onto an ISO 639-1 code or "und". Region subtags are
// dropped ("en-US" -> "en") and retired codes mapped to current ones.
inline std::string normalize_language(std::string_view raw) {
  static const std::unordered_set<std::string_view> kIso6391 = {
      "aa", "ab", "ae", "af", "ak", "am", "an", "ar", "as", "av", "ay", "az", "ba", "be", "bg", "bh", "bi",
      "bm", "bn", "bo", "br", "bs", "ca", "ce", "ch", "co", "cr", "cs", "cu", "cv", "cy", "da", "de", "dv",
      "dz", "ee", "el", "en", "eo", "es", "et", "eu", "fa", "ff", "fi", "fj", "fo", "fr", "fy", "ga", "gd",
      "gl", "gn", "gu", "gv", "ha", "he", "hi", "ho", "hr", "ht", "hu", "hy", "hz", "ia", "id", "ie", "ig",
      "ii", "ik", "io", "is", "it", "iu", "ja", "jv", "ka", "kg", "ki", "kj", "kk", "kl", "km", "kn", "ko",
      "kr", "ks", "ku", "kv", "kw", "ky", "la", "lb", "lg", "li", "ln", "lo", "lt", "lu", "lv", "mg", "mh",
      "mi", "mk", "ml", "mn", "mr", "ms", "mt", "my", "na", "nb", "nd", "ne", "ng", "nl", "nn", "no", "nr",
      "nv", "ny", "oc", "oj", "om", "or", "os", "pa", "pi", "pl", "ps", "pt", "qu", "rm", "rn", "ro", "ru",
      "rw", "sa", "sc", "sd", "se", "sg", "si", "sk", "sl", "sm", "sn", "so", "sq", "sr", "ss", "st", "su",
      "sv", "sw", "ta", "te", "tg", "th", "ti", "tk", "tl", "tn", "to", "tr", "ts", "tt", "tw", "ty", "ug",
      "uk", "ur", "uz", "ve", "vi", "vo", "wa", "wo", "xh", "yi", "yo", "za", "zh", "zu"};
  std::string code;
  for (char c : raw) {
    if (c == '-' || c == '_') break;
    code.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  if (code == "in") code = "id";
  if (code == "iw") code = "he";
  if (code == "ji") code = "yi";
  if (kIso6391.contains(code)) return code;
  return std::string(kUndetermined);
}

inline nlohmann::json to_json(const PredictionRecord& r) {
  nlohmann::json j;
  j["id"] = r.message_id;
  j["system"] = r.system;
  j["lang"] = r.language;
  if (r.confidence) j["confidence"] = *r.confidence;
  if (r.queried_at) j["queried_at"] = *r.queried_at;
  if (r.error) j["error"] = *r.error;
  return j;
}

struct LoadedPredictions {
  std::vector<PredictionRecord> records;
  std::vector<std::string> warnings;
};

// One record per JSONL line. `system_name` fills in lines without a
// "system" field. Repeated (system, id) pairs keep the last line's values.
inline LoadedPredictions load_predictions(const std::string& path, const std::string& system_name = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read predictions file " + path);
  LoadedPredictions out;
  std::unordered_map<std::string, std::size_t> slot;  // system \t id -> index
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path + ": line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError(where + ": malformed JSON");
    }
    if (!j.is_object()) throw DataError(where + ": record is not an object");
    if (!j.contains("id") || !j["id"].is_string()) throw DataError(where + ": missing string field 'id'");
    if (!j.contains("lang") || !j["lang"].is_string()) throw DataError(where + ": missing string field 'lang'");
    PredictionRecord r;
    r.message_id = j["id"].get<std::string>();
    r.language = normalize_language(j["lang"].get<std::string>());
    if (j.contains("system") && !j["system"].is_null()) {
      if (!j["system"].is_string()) throw DataError(where + ": field 'system' must be a string");
      r.system = j["system"].get<std::string>();
    } else {
      r.system = system_name;
    }
    if (r.system.empty()) throw DataError(where + ": no system name");
    if (j.contains("confidence") && !j["confidence"].is_null()) {
      if (!j["confidence"].is_number()) throw DataError(where + ": field 'confidence' must be a number");
      const double c = j["confidence"].get<double>();
      if (c < 0.0 || c > 1.0) throw DataError(where + ": confidence outside [0, 1]");
      r.confidence = c;
    }
    if (j.contains("queried_at") && j["queried_at"].is_string()) r.queried_at = j["queried_at"].get<std::string>();
    if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();

    const auto key = r.system + '\t' + r.message_id;
    if (auto it = slot.find(key); it != slot.end()) {
      out.warnings.push_back(where + ": duplicate prediction for (" + r.system + ", " + r.message_id +
                             "); last one wins");
      out.records[it->second] = std::move(r);
    } else {
      slot.emplace(key, out.records.size());
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

inline void write_predictions(const std::vector<PredictionRecord>& records, const std::string& path) {
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp);
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) throw DataError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Remote endpoints

struct EndpointConfig {
  std::string base_url;          // scheme://host[:port]/path
  std::string auth;              // credential, resolved from the environment
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::string request_template = R"({"text": {text}})";
  std::string response_language_path = "/lang";
  std::string response_confidence_path;  // optional
  double rate_limit = 1.0;               // requests per second
  double timeout = 10.0;                 // seconds
  int max_retries = 3;
  double backoff = 0.5;  // seconds before the first retry, doubled each time
  int concurrency = 1;

  void validate() const {
    if (!(rate_limit > 0.0)) throw ArgumentError("rate_limit must be positive");
    if (max_retries < 0) throw ArgumentError("max_retries must be non-negative");
    if (!(timeout > 0.0)) throw ArgumentError("timeout must be positive");
    if (concurrency < 1) throw ArgumentError("concurrency must be positive");
    if (request_template.find("{text}") == std::string::npos) {
      throw ArgumentError("request_template needs a {text} placeholder");
    }
  }
};

// Reads an endpoint config file. Credentials are never stored in the file:
// "auth_env" names the environment variable holding them.
inline EndpointConfig load_endpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read endpoint config " + path);
  EndpointConfig c;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.contains("auth")) throw DataError("endpoint config must not contain credentials; use auth_env");
    c.base_url = j.at("base_url").get<std::string>();
    c.auth_header = j.value("auth_header", c.auth_header);
    c.auth_prefix = j.value("auth_prefix", c.auth_prefix);
    c.request_template = j.value("request_template", c.request_template);
    c.response_language_path = j.value("response_language_path", c.response_language_path);
    c.response_confidence_path = j.value("response_confidence_path", c.response_confidence_path);
    c.rate_limit = j.value("rate_limit", c.rate_limit);
    c.timeout = j.value("timeout", c.timeout);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff = j.value("backoff", c.backoff);
    c.concurrency = j.value("concurrency", c.concurrency);
    if (j.contains("auth_env")) {
      const auto var = j["auth_env"].get<std::string>();
      const char* value = std::getenv(var.c_str());
      if (!value) throw RemoteError("credential variable " + var + " is not set");
      c.auth = value;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed endpoint config " + path + ": " + e.what());
  }
  c.validate();
  return c;
}

// Token bucket of capacity one: grants at most `rate` acquisitions per
// second across all threads sharing it.
class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;

  explicit TokenBucket(double rate)
      : interval_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / rate))),
        next_(Clock::now()) {}

  void acquire() {
    Clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = Clock::now();
      slot = std::max(next_, now);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  Clock::duration interval_;
  Clock::time_point next_;
  std::mutex mu_;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ArgumentError("base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string render_request(const std::string& tmpl, const std::string& text) {
  const auto literal = nlohmann::json(text).dump();
  std::string out;
  std::size_t pos = 0;
  for (;;) {
    const auto hit = tmpl.find("{text}", pos);
    if (hit == std::string::npos) break;
    out.append(tmpl, pos, hit - pos);
    out += literal;
    pos = hit + 6;
  }
  out.append(tmpl, pos);
  return out;
}

enum class Outcome { ok, transient, permanent, auth };

struct Attempt {
  Outcome outcome;
  std::string language;
  std::optional<double> confidence;
  std::string note;
};

inline Attempt interpret(const httplib::Result& res, const EndpointConfig& config) {
  if (!res) return {Outcome::transient, {}, {}, "transport error: " + httplib::to_string(res.error())};
  const int status = res->status;
  if (status == 401 || status == 403) return {Outcome::auth, {}, {}, "HTTP " + std::to_string(status)};
  if (status == 429 || status >= 500) return {Outcome::transient, {}, {}, "HTTP " + std::to_string(status)};
  if (status < 200 || status >= 300) return {Outcome::permanent, {}, {}, "HTTP " + std::to_string(status)};
  try {
    const auto body = nlohmann::json::parse(res->body);
    const auto& lang = body.at(nlohmann::json::json_pointer(config.response_language_path));
    if (!lang.is_string()) return {Outcome::permanent, {}, {}, "language field is not a string"};
    Attempt a{Outcome::ok, normalize_language(lang.get<std::string>()), {}, {}};
    if (!config.response_confidence_path.empty()) {
      const nlohmann::json::json_pointer ptr(config.response_confidence_path);
      if (body.contains(ptr) && body.at(ptr).is_number()) {
        a.confidence = std::clamp(body.at(ptr).get<double>(), 0.0, 1.0);
      }
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    return {Outcome::permanent, {}, {}, std::string("unparseable response: ") + e.what()};
  }
}

}  // namespace detail

// Queries the endpoint once per message (plus retries), then persists all
// records to `out_path` before returning them. Per-message failures become
// "und" records with an error note; authentication failures abort.
inline std::vector<PredictionRecord> query_remote(const EndpointConfig& config, const std::vector<Message>& messages,
                                                  const std::string& system_name, const std::string& out_path) {
  config.validate();
  const auto url = detail::parse_url(config.base_url);
  TokenBucket bucket(config.rate_limit);
  std::vector<PredictionRecord> records(messages.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> auth_failed{false};
  std::mutex err_mu;
  std::string auth_error;

  auto worker = [&] {
    httplib::Client client(url.scheme_host_port);
    const auto secs = static_cast<time_t>(config.timeout);
    const auto usecs = static_cast<time_t>((config.timeout - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config.auth.empty()) headers.emplace(config.auth_header, config.auth_prefix + config.auth);

    for (;;) {
      if (auth_failed) return;
      const std::size_t i = next++;
      if (i >= messages.size()) return;
      const auto& m = messages[i];
      PredictionRecord& r = records[i];
      r.message_id = m.id;
      r.system = system_name;
      const auto body = detail::render_request(config.request_template, m.clean_text);
      double wait = config.backoff;
      for (int attempt = 0;; ++attempt) {
        bucket.acquire();
        r.queried_at = utc_timestamp();
        const auto a = detail::interpret(client.Post(url.path, headers, body, "application/json"), config);
        if (a.outcome == detail::Outcome::ok) {
          r.language = a.language;
          r.confidence = a.confidence;
          r.error.reset();
          break;
        }
        if (a.outcome == detail::Outcome::auth) {
          std::lock_guard lock(err_mu);
          auth_failed = true;
          auth_error = "authentication rejected by " + config.base_url + " (" + a.note + ")";
          return;
        }
        if (a.outcome == detail::Outcome::permanent || attempt >= config.max_retries) {
          r.language = std::string(kUndetermined);
          r.confidence.reset();
          r.error = a.note + (attempt > 0 ? " after " + std::to_string(attempt + 1) + " attempts" : "");
          break;
        }
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        wait *= 2.0;
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(config.concurrency), std::max<std::size_t>(1, messages.size())));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (auth_failed) throw RemoteError(auth_error);

  write_predictions(records, out_path);
  return records;
}

}  // namespace dialect_audit::adapters
