#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

// Raised for malformed or out-of-range input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EventRecord {
  std::uint32_t sample_id = 0;
  std::uint32_t label = 0;
  std::uint32_t channel = 0;
  double time = 0.0;  // seconds

  bool operator==(const EventRecord&) const = default;
};

// Text event file:
//   #snnevt v1 raw_channels=<int> classes=<int>
//   sample_id,label,channel,time_seconds
//   ...
struct EventFile {
  std::size_t raw_channels = 700;
  std::size_t classes = 20;
  std::vector<EventRecord> events;
};

EventFile parse_events(std::istream& in);
EventFile parse_events(const std::filesystem::path& path);
void write_events(std::ostream& out, const EventFile& file);

struct BinningSpec {
  std::size_t raw_channels = 700;
  std::size_t channel_factor = 5;
  double bin_width = 0.01;  // seconds
  std::size_t steps = 100;
  bool binarize = false;

  std::size_t channels() const { return raw_channels / channel_factor; }
  void validate() const;
};

// (steps x channels) grid. Cell (floor(time / bin_width), floor(channel /
// factor)) counts events; events at or beyond steps * bin_width are dropped.
Matrix bin_sample(std::span<const EventRecord> events, const BinningSpec& spec);

struct Sample {
  Matrix values;  // (steps x channels)
  int label = 0;
};

struct Dataset {
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::size_t classes = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Groups events by sample_id (ascending) and bins each sample.
Dataset bin_events(const EventFile& file, const BinningSpec& spec);

// Binary tensor file: "SNNB", u32 version = 1, u32 num_samples, u32 steps,
// u32 channels, then per sample u32 label followed by steps * channels
// float32 values, row-major by time. All integers little-endian.
void write_binned(const std::filesystem::path& path, const Dataset& data);
Dataset read_binned(const std::filesystem::path& path, std::size_t classes);

struct Batch {
  SpikeTensor inputs;
  std::vector<int> labels;
  std::vector<std::size_t> indices;  // positions in the source dataset
};

// Consecutive batches of `batch_size`; the last partial batch is kept. With
// a seed the sample order is shuffled deterministically, without one the
// dataset order is preserved.
std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed);

SpikeTensor stack_samples(const Dataset& data, std::span<const std::size_t> indices);

// Disjoint, exhaustive split; round(fraction * n) samples go to validation.
std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction,
                                             std::uint64_t seed);

// key=value file naming the split files and binning parameters.
struct DatasetManifest {
  std::filesystem::path train;
  std::filesystem::path valid;
  std::filesystem::path test;
  std::size_t classes = 20;
  BinningSpec binning{};
  double valid_fraction = 0.2;  // used when no valid split is given
};

DatasetManifest parse_manifest(const std::filesystem::path& path);

// Loads a split as binned tensors. `.snnb` files are read directly, any other
// extension is parsed as a text event file and binned.
Dataset load_split(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace snn
