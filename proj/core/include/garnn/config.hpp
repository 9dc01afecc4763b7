#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

namespace garnn {

/// Flat dotted-key configuration: `key = value` lines with '#' comments,
/// plus `--set key=value` overrides. Values stay strings until a typed
/// getter asks for them; a malformed value names the key in the error.
class KvConfig {
 public:
  KvConfig() = default;

  /// Flat key=value text. If the file is a JSON run manifest (object with
  /// a "config" member), the embedded config is loaded instead, so a
  /// manifest can reproduce its run.
  static KvConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  /// Parses one "key=value" token (the --set form).
  void set_pair(const std::string& pair);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Rejects keys that are not in the documented set (prefix match on
  /// "<section>." entries is not enough; exact names are required).
  void require_known(std::span<const std::string> known_keys) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace garnn
