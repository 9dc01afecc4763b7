#include "garnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <span>
#include <sstream>

#include <json.hpp>

#include "garnn/error.hpp"

namespace garnn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  KvConfig out;

  // A run manifest is accepted anywhere a config is: reuse its snapshot.
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::config, path + ": not valid JSON: " + e.what());
    }
    if (!doc.contains("config") || !doc["config"].is_object()) {
      fail(ErrorCode::config, path + ": JSON config must be a run manifest "
                                     "with a 'config' object");
    }
    for (const auto& [key, value] : doc["config"].items()) {
      out.values_[key] = value.is_string() ? value.get<std::string>()
                                           : value.dump();
    }
    return out;
  }

  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::config, path + ": line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      fail(ErrorCode::config,
           path + ": line " + std::to_string(line_no) + ": empty key");
    }
    out.values_[key] = value;
  }
  return out;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

void KvConfig::set_pair(const std::string& pair) {
  const auto eq = pair.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail(ErrorCode::config, "override '" + pair + "' must be key=value");
  }
  set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
}

bool KvConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double out;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCode::config, "key '" + key + "': bad number '" + s + "'");
  }
  return out;
}

std::int64_t KvConfig::get_int(const std::string& key,
                               std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t out;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCode::config, "key '" + key + "': bad integer '" + s + "'");
  }
  return out;
}

std::uint64_t KvConfig::get_uint(const std::string& key,
                                 std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t out;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCode::config, "key '" + key + "': bad integer '" + s + "'");
  }
  return out;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& s = it->second;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail(ErrorCode::config, "key '" + key + "': bad boolean '" + s + "'");
}

void KvConfig::require_known(std::span<const std::string> known_keys) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known_keys.begin(), known_keys.end(), key) ==
        known_keys.end()) {
      fail(ErrorCode::config, "unknown configuration key '" + key + "'");
    }
  }
}

}  // namespace garnn
