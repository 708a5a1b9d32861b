#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "exitnet/errors.hpp"

namespace exitnet {

/// FNV-1a 64-bit content hash; stable across platforms, cheap, and good
/// enough to detect artifact drift.
inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for hashing: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  std::string bytes = buf.str();
  char out[32];
  std::snprintf(out, sizeof out, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return out;
}

/// Run provenance: the effective config, the dataset seed, and a hash for
/// every artifact the run produced. Paths are relative to the manifest's
/// directory.
struct RunManifest {
  std::string config_text;
  std::uint64_t dataset_seed = 0;
  std::map<std::string, std::string> artifacts;  // name -> relative path
  std::map<std::string, std::string> hashes;     // name -> content hash

  void add_artifact(const std::string& name, const std::string& rel_path,
                    const std::string& dir) {
    artifacts[name] = rel_path;
    hashes[name] = hash_file(dir + "/" + rel_path);
  }

  void write(const std::string& path) const {
    nlohmann::json j;
    j["config"] = config_text;
    j["dataset_seed"] = dataset_seed;
    j["artifacts"] = artifacts;
    j["hashes"] = hashes;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot open for write: " + path);
    os << j.dump(2) << "\n";
    if (!os) throw FormatError("write failed: " + path);
  }

  static RunManifest read(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open: " + path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": invalid manifest JSON: " + e.what());
    }
    RunManifest m;
    m.config_text = j.at("config").get<std::string>();
    m.dataset_seed = j.at("dataset_seed").get<std::uint64_t>();
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    m.hashes = j.at("hashes").get<std::map<std::string, std::string>>();
    return m;
  }
};

/// True when every artifact listed in the manifest exists next to it and
/// hashes to the recorded value.
inline bool verify_manifest(const std::string& manifest_path) {
  RunManifest m = RunManifest::read(manifest_path);
  std::string dir = ".";
  auto slash = manifest_path.find_last_of('/');
  if (slash != std::string::npos) dir = manifest_path.substr(0, slash);
  for (const auto& [name, rel] : m.artifacts) {
    auto it = m.hashes.find(name);
    if (it == m.hashes.end()) return false;
    try {
      if (hash_file(dir + "/" + rel) != it->second) return false;
    } catch (const FormatError&) {
      return false;
    }
  }
  return true;
}

}  // namespace exitnet
