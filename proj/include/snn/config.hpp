#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snn/network.hpp"
#include "snn/textutil.hpp"
#include "snn/training.hpp"

namespace snn {

// Everything a run needs, resolved before any compute starts.
struct RunConfig {
  std::string preset;
  NetworkConfig network{};
  TrainConfig train{};
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "run";
  bool round_delays_for_eval = false;
};

// Hyperparameter presets: "shd", "ssc", "gsc". Throws ConfigError.
RunConfig preset_config(const std::string& name);

// Sets one key. Unknown keys and unparsable values throw ConfigError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// Resolution order: preset (from `preset_name`, else a `preset` key in the
// file, else "shd"), then the file's keys, then `overrides` ("key=value").
RunConfig resolve_run_config(const std::optional<std::filesystem::path>& file,
                             const std::optional<std::string>& preset_name,
                             const std::vector<std::string>& overrides);

// Canonical key=value dump; feeding it back through resolve_run_config
// reproduces the same configuration.
std::string describe(const RunConfig& config);

std::vector<std::string> known_config_keys();

}  // namespace snn
