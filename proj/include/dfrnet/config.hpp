#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dfrnet {

/// Flat `key = value` text configuration. Blank lines and lines starting
/// with '#' are ignored; trailing `# ...` comments are stripped.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValues load(const std::filesystem::path& path);

  std::string serialize() const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& at(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void merge(const KeyValues& other);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int64_t> get_ints(const std::string& key, const std::vector<int64_t>& fallback) const;

  /// Throws ParameterError naming the first key not in `known`.
  void reject_unknown(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::string join_ints(const std::vector<int64_t>& values);
std::string format_double(double value);

int64_t parse_int(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);
bool parse_bool(const std::string& text, const std::string& what);
std::vector<int64_t> parse_ints(const std::string& text, const std::string& what);

}  // namespace dfrnet
