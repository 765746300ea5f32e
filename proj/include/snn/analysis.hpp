#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "snn/data.hpp"
#include "snn/network.hpp"

namespace snn {

struct GridRange {
  double min = 0.0;
  double max = 1.0;
  std::size_t steps = 2;

  double at(std::size_t k) const;
};

// Single-neuron sweep over the adaptation couplings (a, b) with a fixed
// input spike train. The neuron starts from the zero state; a and b are not
// clipped, so the unstable a < 0 half-plane is reachable.
struct RegimeMapSpec {
  GridRange a{-1.0, 1.0, 81};
  GridRange b{-0.5, 2.5, 81};
  std::size_t steps = 100;
  std::vector<std::size_t> spike_times;
  double alpha = 0.96;
  double beta = 0.96;
  double weight = 25.0;
  double theta = 1.0;

  void validate() const;
};

// 12 equidistant input spikes (t = 4, 12, ..., 92) over 100 steps.
RegimeMapSpec canonical_regime_spec();

// key = value file; any key left out keeps its canonical value. Keys:
// a_min a_max a_steps b_min b_max b_steps steps spike_times alpha beta weight theta
RegimeMapSpec load_regime_spec(const std::filesystem::path& path);

int count_output_spikes(double a, double b, const RegimeMapSpec& spec);

struct RegimeCell {
  double a = 0.0;
  double b = 0.0;
  int count = 0;
};

struct RegimeMap {
  std::size_t a_steps = 0;
  std::size_t b_steps = 0;
  std::vector<RegimeCell> cells;  // a-major: cells[ia * b_steps + ib]

  const RegimeCell& at(std::size_t ia, std::size_t ib) const { return cells[ia * b_steps + ib]; }
};

RegimeMap regime_map(const RegimeMapSpec& spec, unsigned threads = 0);

// Header "a,b,count", one row per grid point in a-major order.
void write_regime_csv(std::ostream& out, const RegimeMap& map);

// Grid points with a >= 0 where the count rises from b to the next b.
struct MonotonicityFinding {
  double a;
  double b_from;
  double b_to;
  int count_from;
  int count_to;
};
std::vector<MonotonicityFinding> b_monotonicity_findings(const RegimeMap& map);

struct LayerSpikeStats {
  std::uint64_t total_spikes = 0;
  std::size_t neurons = 0;
  std::size_t timesteps = 0;
  std::size_t samples = 0;

  // Average spike count per neuron for one sample.
  double per_neuron() const;
};

struct SpikeStats {
  std::array<LayerSpikeStats, 2> layers;
  double per_neuron() const;  // over both hidden layers
};

// Eval-mode pass over `data`, counting hidden-layer spikes.
SpikeStats spike_stats(const Model& model, const Dataset& data, std::size_t batch_size,
                       std::uint64_t seed, unsigned threads = 0);

// One CSV per neuron parameter per hidden layer ("neuron,value") and one per
// synapse set for delays ("pre,post,delay"). Returns the written paths.
std::vector<std::filesystem::path> export_distributions(const Model& model,
                                                        const std::filesystem::path& dir);

}  // namespace snn
