#include "garnn/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "garnn/error.hpp"

namespace garnn {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hash_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path + " for hashing");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();
  char out[32];
  std::snprintf(out, sizeof(out), "fnv1a64:%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(content.data(), content.size())));
  return out;
}

void RunManifest::add_input(const std::string& path) {
  inputs[path] = hash_file_hex(path);
}

void RunManifest::add_artifact(const std::string& path) {
  artifacts[path] = hash_file_hex(path);
}

void RunManifest::write(const std::string& path) const {
  nlohmann::json doc;
  doc["command"] = command;
  doc["seed"] = seed;
  doc["config"] = config;
  doc["inputs"] = inputs;
  doc["artifacts"] = artifacts;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << doc.dump(1) << '\n';
}

}  // namespace garnn
