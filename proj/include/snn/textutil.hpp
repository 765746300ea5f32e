#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace snn {

// Invalid configuration: unknown key, unparsable value, missing file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

// Parses `key = value` lines. '#' starts a comment, blank lines are skipped,
// values may be wrapped in double quotes. Order is preserved; duplicates are
// rejected.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text,
                                                                  const std::string& origin);
std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path);

std::size_t parse_size(const std::string& value, const std::string& key);
double parse_real(const std::string& value, const std::string& key);
long long parse_int(const std::string& value, const std::string& key);
bool parse_bool(const std::string& value, const std::string& key);
std::vector<double> parse_real_list(const std::string& value, const std::string& key);

}  // namespace snn
