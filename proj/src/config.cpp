#include "dfrnet/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dfrnet/errors.hpp"

namespace dfrnet {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

int64_t parse_int(const std::string& text, const std::string& what) {
  const auto t = trim(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || errno != 0 || *end != '\0') throw ParameterError(what + ": expected an integer, got '" + text + "'");
  return v;
}

double parse_double(const std::string& text, const std::string& what) {
  const auto t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || errno != 0 || *end != '\0') throw ParameterError(what + ": expected a number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const std::string& what) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  throw ParameterError(what + ": expected a boolean, got '" + text + "'");
}

std::vector<int64_t> parse_ints(const std::string& text, const std::string& what) {
  std::vector<int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(item, what));
  if (out.empty()) throw ParameterError(what + ": expected a comma-separated integer list");
  return out;
}

std::string join_ints(const std::vector<int64_t>& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string format_double(double value) {
  // %.17g round-trips IEEE doubles exactly.
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParameterError(origin + ":" + std::to_string(line_no) + ": empty key");
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

std::string KeyValues::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

const std::string& KeyValues::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParameterError("missing key '" + key + "'");
  return it->second;
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key) : fallback;
}

int64_t KeyValues::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? parse_int(at(key), key) : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_double(at(key), key) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? parse_bool(at(key), key) : fallback;
}

std::vector<int64_t> KeyValues::get_ints(const std::string& key, const std::vector<int64_t>& fallback) const {
  return has(key) ? parse_ints(at(key), key) : fallback;
}

void KeyValues::reject_unknown(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : values_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ParameterError("unknown configuration key '" + k + "'");
    }
  }
}

}  // namespace dfrnet
