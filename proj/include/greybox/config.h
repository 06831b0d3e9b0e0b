#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace greybox {

/// Configuration problem tied to a key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat key=value configuration with dotted keys. Lines starting with '#' and
/// blank lines are ignored; whitespace around keys and values is trimmed.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void erase(const std::string& key) { values_.erase(key); }

  const std::map<std::string, std::string>& entries() const { return values_; }
  /// Keys in sorted order, one key=value per line.
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace greybox
