#include "ctct/config.hpp"

#include <fstream>
#include <sstream>

#include "ctct/error.hpp"

namespace ctct {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

KeyValueConfig KeyValueConfig::parse_text(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidConfig,
                  origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty())
      throw Error(ErrorKind::InvalidConfig, origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.entries_[key] = val;
  }
  return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KeyValueConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw Error(ErrorKind::InvalidConfig, origin_ + ": missing key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& def) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? def : it->second;
}

long long KeyValueConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    size_t pos = 0;
    long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidConfig, origin_ + ": key '" + key + "' is not an integer: " + v);
  }
}

long long KeyValueConfig::get_int(const std::string& key, long long def) const {
  return has(key) ? get_int(key) : def;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidConfig, origin_ + ": key '" + key + "' is not a number: " + v);
  }
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
  return has(key) ? get_double(key) : def;
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
  if (!has(key)) return def;
  std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::InvalidConfig, origin_ + ": key '" + key + "' is not a boolean: " + v);
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::string& def) const {
  std::string v = get_string(key, def);
  std::vector<std::string> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void KeyValueConfig::require_known_keys(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : entries_) {
    if (!allowed.count(k))
      throw Error(ErrorKind::InvalidConfig, origin_ + ": unknown key '" + k + "'");
  }
}

std::string KeyValueConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

uint64_t KeyValueConfig::hash() const {
  // FNV-1a 64
  uint64_t h = 1469598103934665603ull;
  for (char c : canonical_text()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace ctct
