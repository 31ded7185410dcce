#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace asmaml {

// Flat key-value configuration with dotted section keys:
//   meta.inner_lr = 0.0001
// '#' starts a comment; blank lines are ignored. CLI --set overrides win.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  // "key=value" as given on the command line.
  void set_override(const std::string& assignment);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  std::vector<int> get_int_list(const std::string& key) const;       // comma-separated
  std::vector<std::string> get_string_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace asmaml
