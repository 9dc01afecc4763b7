#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace garnn {

/// FNV-1a 64-bit content fingerprint (reproducibility checks, not crypto).
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hash_file_hex(const std::string& path);

/// Run manifest written next to every command's artifacts: the resolved
/// config snapshot, the seed, input files with hashes, and artifact
/// hashes. Feeding the manifest back as --config reproduces the run
/// bit-identically.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;     // resolved key -> value
  std::map<std::string, std::string> inputs;     // path -> hash
  std::map<std::string, std::string> artifacts;  // path -> hash

  void add_input(const std::string& path);
  void add_artifact(const std::string& path);
  void write(const std::string& path) const;
};

}  // namespace garnn
