#pragma once

#include <filesystem>
#include <stdexcept>

#include "snn/network.hpp"

namespace snn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary container, all values little-endian, field order in
// docs/formats.md. Written to `<path>.tmp` and renamed into place, so a
// failed save never leaves a partial file at `path`.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace snn
