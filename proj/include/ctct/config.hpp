#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace ctct {

// Flat `key = value` UTF-8 text config. '#' starts a comment line.
// Duplicate keys: last one wins. Lookup helpers throw Error{InvalidConfig}
// on missing keys or unparsable values.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_text(const std::string& text, const std::string& origin = "<text>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long def) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<std::string> get_list(const std::string& key, const std::string& def) const;

  // Throws Error{InvalidConfig} naming the first key not in `allowed`.
  void require_known_keys(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Canonical serialized form (sorted keys), and a stable 64-bit hash of it.
  std::string canonical_text() const;
  uint64_t hash() const;

 private:
  std::map<std::string, std::string> entries_;
  std::string origin_ = "<empty>";
};

std::string trim(const std::string& s);

}  // namespace ctct
