#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snn/delay.hpp"
#include "snn/neuron.hpp"
#include "snn/tensor.hpp"

namespace snn {

// How per-step readout potentials become class scores.
//   softmax_sum:    score_c = sum_t softmax(u_out[t])_c
//   sum_potentials: score_c = sum_t u_out_c[t]
enum class ReadoutMode { softmax_sum, sum_potentials };

// Simulated horizon: the input length T, or T + d_max so that spikes delayed
// past the end of the input still reach the readout.
enum class Horizon { input, extended };

enum class NeuronModel { adlif_plus, lif };

enum class Mode { train, eval };

struct NetworkConfig {
  std::size_t inputs = 140;
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 128;
  std::size_t classes = 20;
  std::array<double, 2> dropout{0.5, 0.5};
  int d_max = kDefaultMaxDelay;
  Threshold threshold{};
  ReadoutMode readout = ReadoutMode::softmax_sum;
  Horizon horizon = Horizon::input;
  NeuronModel neuron_model = NeuronModel::adlif_plus;
  bool train_delays = true;
  SpikeShape spike{};

  // Throws std::invalid_argument on zero sizes, dropout outside [0, 1) or
  // negative d_max.
  void validate() const;
  NeuronBounds bounds() const;
  std::size_t layer_size(std::size_t layer) const;  // 0 = input ... 3 = classes
};

// One layer-to-layer connection. weights(j, i) connects pre j to post i.
struct SynapseSet {
  Matrix weights;
  std::vector<double> bias;
  DelayMatrix delays;

  bool operator==(const SynapseSet&) const = default;
};

// Two hidden AdLIF layers and a memoryless readout:
//   synapses[0]: input -> hidden1, synapses[1]: hidden1 -> hidden2,
//   synapses[2]: hidden2 -> readout.
struct Model {
  NetworkConfig config;
  std::array<SynapseSet, 3> synapses;
  std::array<NeuronParams, 2> neurons;

  std::size_t parameter_count() const;
};

// Xavier-uniform weights, zero biases, zero delays, neuron parameters
// uniform inside the model's bounds.
Model init_model(const NetworkConfig& config, std::uint64_t seed);

std::size_t simulated_steps(const NetworkConfig& config, std::size_t input_steps);

struct ForwardOptions {
  Mode mode = Mode::eval;
  std::uint64_t seed = 0;
  StateInit state_init = StateInit::random_uniform;
  unsigned threads = 0;  // 0 = hardware concurrency
};

// Saved forward quantities of one hidden layer, all (steps x neurons).
struct LayerTrace {
  Matrix current;
  Matrix u;
  Matrix w;
  Matrix s;
  Matrix mask;    // inverted-dropout multipliers; empty when dropout is off
  Matrix output;  // s * mask, what the next synapse set sees
  std::vector<double> u0;
  std::vector<double> w0;
};

struct SampleRecord {
  std::array<LayerTrace, 2> hidden;
  Matrix readout_potential;  // (steps x classes)
  std::vector<double> scores;
  std::array<std::uint64_t, 2> spike_counts{};
};

struct ForwardRecord {
  std::size_t input_steps = 0;
  std::size_t steps = 0;  // simulated horizon
  std::vector<SampleRecord> samples;
};

struct SpikeCounts {
  std::array<std::uint64_t, 2> per_layer{};
};

struct ForwardResult {
  Matrix scores;  // (batch x classes)
  ForwardRecord record;
  SpikeCounts spikes;
};

// I_i = sum_j F_ji a_ji[t] + bias_i at the line's current time.
void layer_forward(const DelayLine& line, const SynapseSet& synapses, std::span<double> current);

// Same, with taps precomputed once per pass (see make_taps).
void layer_forward(const DelayLine& line, const SynapseSet& synapses,
                   std::span<const DelayTap> taps, std::span<double> current);

std::vector<double> readout(const Matrix& potentials, ReadoutMode mode);

// Runs one sample given as a (steps x inputs) row-major slab. `sample_index`
// selects the per-sample random streams so results do not depend on how a
// batch is split across threads. Throws std::runtime_error naming the layer
// and step when a non-finite value appears.
SampleRecord forward_sample(std::span<const double> input, std::size_t input_steps,
                            const Model& model, const ForwardOptions& options,
                            std::uint64_t sample_index);

ForwardResult network_forward(const SpikeTensor& batch, const Model& model,
                              const ForwardOptions& options);

std::string to_string(ReadoutMode mode);
std::string to_string(Horizon horizon);
std::string to_string(NeuronModel model);
ReadoutMode parse_readout_mode(const std::string& text);
Horizon parse_horizon(const std::string& text);
NeuronModel parse_neuron_model(const std::string& text);

}  // namespace snn
