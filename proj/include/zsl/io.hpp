#pragma once

// Plot-ready persistence: CSV with 17-significant-digit floats plus a JSON
// metadata sidecar carrying the config hash, seed, and artifact version.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsl/errors.hpp"

namespace zsl {

inline constexpr const char* kArtifactVersion = "1.0.0";

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void write_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

inline void write_sidecar(const std::string& csv_path,
                          const std::string& config_dump,
                          std::uint64_t seed) {
  nlohmann::json meta;
  meta["config_hash"] = fnv1a_hash(config_dump);
  meta["seed"] = seed;
  meta["artifact_version"] = kArtifactVersion;
  std::ofstream out(csv_path + ".meta.json", std::ios::binary);
  if (!out) throw ConfigError("cannot open sidecar for: " + csv_path);
  out << meta.dump(2) << "\n";
}

}  // namespace zsl
