#pragma once

// Run manifests: every CLI output gets a sibling <output>.manifest.json that
// records the subcommand, its effective configuration, and SHA-256 digests
// of inputs and outputs.

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "dialect_audit/error.hpp"

namespace dialect_audit {

inline constexpr std::string_view kToolVersion = "1.0.0";

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path + " for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

inline std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

struct Manifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();
  // role -> {path, sha256}
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();

  void add_input(const std::string& role, const std::string& path) {
    inputs[role] = {{"path", path}, {"sha256", sha256_file(path)}};
  }
  void add_output(const std::string& role, const std::string& path) {
    outputs[role] = {{"path", path}, {"sha256", sha256_file(path)}};
  }

  nlohmann::json to_json() const {
    return {{"tool", "dialect-audit"},
            {"version", std::string(kToolVersion)},
            {"subcommand", subcommand},
            {"config", config},
            {"inputs", inputs},
            {"outputs", outputs}};
  }

  // Written next to `primary_output`.
  void write(const std::string& primary_output) const {
    std::ofstream out(manifest_path(primary_output), std::ios::binary);
    if (!out) throw DataError("cannot write manifest for " + primary_output);
    out << to_json().dump(2) << '\n';
  }
};

inline std::optional<nlohmann::json> read_manifest(const std::string& output) {
  const auto path = manifest_path(output);
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed manifest " + path + ": " + e.what());
  }
}

}  // namespace dialect_audit
