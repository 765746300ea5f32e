#include "snn/textutil.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace snn {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text,
                                                                  const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') continue;  // TOML-style section headers are ignored
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    out.emplace_back(std::move(key), std::string(value));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

namespace {

template <typename T>
T parse_exact(const std::string& value, const std::string& key, const char* kind) {
  T out{};
  const auto text = trim(value);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("'" + key + "': expected " + kind + ", got '" + value + "'");
  }
  return out;
}

}  // namespace

std::size_t parse_size(const std::string& value, const std::string& key) {
  return parse_exact<std::size_t>(value, key, "a non-negative integer");
}

double parse_real(const std::string& value, const std::string& key) {
  return parse_exact<double>(value, key, "a number");
}

long long parse_int(const std::string& value, const std::string& key) {
  return parse_exact<long long>(value, key, "an integer");
}

bool parse_bool(const std::string& value, const std::string& key) {
  const auto v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "': expected a boolean, got '" + value + "'");
}

std::vector<double> parse_real_list(const std::string& value, const std::string& key) {
  auto text = trim(value);
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    text = text.substr(1, text.size() - 2);
  }
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (auto item : split(text, ',')) out.push_back(parse_real(std::string(trim(item)), key));
  return out;
}

}  // namespace snn
