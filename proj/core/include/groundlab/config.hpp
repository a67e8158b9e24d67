#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace groundlab {

/// Key-value experiment configuration. Lines are `key = value`; `#` starts a
/// comment; the first key must be `version` (currently 1).
class Config {
 public:
  static constexpr int kVersion = 1;

  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace groundlab
