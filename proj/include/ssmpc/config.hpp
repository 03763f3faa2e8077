#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace ssmpc {

// Flat `section.key = value` configuration. Keys are dotted, one entry per
// line, `#` starts a comment. Serialization is sorted, so the digest is a
// stable function of the effective settings.
class KvConfig {
 public:
  static KvConfig parse(const std::string& text);
  static KvConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get(const std::string& key, const std::string& dflt) const;
  int get_int(const std::string& key, int dflt) const;
  double get_double(const std::string& key, double dflt) const;
  uint64_t get_u64(const std::string& key, uint64_t dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;

  // Overlay other's entries on top of this one.
  void merge(const KvConfig& other);

  std::string serialize() const;
  uint64_t digest() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Path from $SSMPC_CONFIG, or empty when unset.
std::string default_config_path();

}  // namespace ssmpc
